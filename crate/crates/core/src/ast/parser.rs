//! Recursive-descent parser producing the canonical token-preserving tree.

use super::keywords::{is_keyword, is_known_function};
use super::lexer::{tokenize, LexKind, LexMode, LexToken};
use super::{ClauseKind, FillType, Node, NodeKind, ParseError, Token, TokenClass};

const COMPARISON_OPS: &[&str] = &["=", "==", "!=", "<>", "<", "<=", ">", ">="];
const JOIN_WORDS: &[&str] = &["JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL"];

pub(super) fn parse_statement_text(src: &str, mode: LexMode) -> Result<Node, ParseError> {
    let tokens = tokenize(src, mode)?;
    let mut p = Parser { tokens, pos: 0, end: src.len() };
    let stmt = p.statement()?;
    if p.at_symbol(";") {
        p.pos += 1;
    }
    if p.pos < p.tokens.len() {
        return Err(p.error("end of statement"));
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<LexToken>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&LexToken> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&LexToken> {
        self.tokens.get(self.pos + n)
    }

    fn error(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(t.offset, expected, &t.describe()),
            None => ParseError::new(self.end, expected, "end of input"),
        }
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(w))
    }

    fn at_symbol(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_symbol(s))
    }

    fn eat_keyword(&mut self, w: &str) -> Option<Node> {
        if self.at_word(w) {
            self.pos += 1;
            Some(Node::Leaf(Token::keyword(w)))
        } else {
            None
        }
    }

    fn expect_keyword(&mut self, w: &str) -> Result<Node, ParseError> {
        self.eat_keyword(w).ok_or_else(|| self.error(w))
    }

    fn eat_punct(&mut self, s: &str) -> Option<Node> {
        if self.at_symbol(s) {
            self.pos += 1;
            Some(Node::Leaf(Token::punct(s)))
        } else {
            None
        }
    }

    fn expect_punct(&mut self, s: &str) -> Result<Node, ParseError> {
        self.eat_punct(s).ok_or_else(|| self.error(&format!("`{s}`")))
    }

    fn at_ident(&self) -> bool {
        self.peek().is_some_and(is_ident_token)
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().filter(|t| is_ident_token(t)) else {
            return Err(self.error("identifier"));
        };
        let node = match tok.kind {
            LexKind::Placeholder(ft) => Node::Placeholder(ft),
            _ => Node::leaf(TokenClass::Identifier, tok.text.clone()),
        };
        self.pos += 1;
        Ok(node)
    }

    // statement := core [compound] [ORDER BY ...] [LIMIT ...]
    fn statement(&mut self) -> Result<Node, ParseError> {
        let mut children = self.core()?;
        if self.at_compound() {
            children.push(self.compound()?);
        }
        if self.at_word("ORDER") {
            children.push(self.order_by()?);
        }
        if self.at_word("LIMIT") {
            children.push(self.limit()?);
        }
        Ok(Node::branch(NodeKind::Statement, children))
    }

    fn at_compound(&self) -> bool {
        self.at_word("UNION") || self.at_word("INTERSECT") || self.at_word("EXCEPT")
    }

    fn compound(&mut self) -> Result<Node, ParseError> {
        let mut children = Vec::new();
        if let Some(u) = self.eat_keyword("UNION") {
            children.push(u);
            if let Some(all) = self.eat_keyword("ALL") {
                children.push(all);
            }
        } else if let Some(kw) = self.eat_keyword("INTERSECT").or_else(|| self.eat_keyword("EXCEPT")) {
            children.push(kw);
        }
        let mut rhs = self.core()?;
        if self.at_compound() {
            rhs.push(self.compound()?);
        }
        children.push(Node::branch(NodeKind::Statement, rhs));
        Ok(Node::branch(NodeKind::Clause(ClauseKind::Compound), children))
    }

    fn core(&mut self) -> Result<Vec<Node>, ParseError> {
        let mut clauses = vec![self.select_clause()?];
        if self.at_word("FROM") {
            clauses.push(self.parse_from()?);
            while JOIN_WORDS.iter().any(|w| self.at_word(w)) {
                clauses.push(self.join_clause()?);
            }
        }
        if let Some(kw) = self.eat_keyword("WHERE") {
            let cond = self.expr()?;
            clauses.push(clause(ClauseKind::Where, vec![kw, cond]));
        }
        if self.at_word("GROUP") {
            let mut children = vec![self.expect_keyword("GROUP")?, self.expect_keyword("BY")?];
            self.comma_list(&mut children, Self::expr)?;
            clauses.push(clause(ClauseKind::GroupBy, children));
        }
        if let Some(kw) = self.eat_keyword("HAVING") {
            let cond = self.expr()?;
            clauses.push(clause(ClauseKind::Having, vec![kw, cond]));
        }
        Ok(clauses)
    }

    fn comma_list(
        &mut self,
        out: &mut Vec<Node>,
        mut item: impl FnMut(&mut Self) -> Result<Node, ParseError>,
    ) -> Result<(), ParseError> {
        out.push(item(self)?);
        while let Some(comma) = self.eat_punct(",") {
            out.push(comma);
            out.push(item(self)?);
        }
        Ok(())
    }

    fn select_clause(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("SELECT")?];
        if let Some(q) = self.eat_keyword("DISTINCT").or_else(|| self.eat_keyword("ALL")) {
            children.push(q);
        }
        children.push(self.result_column()?);
        while let Some(comma) = self.eat_punct(",") {
            children.push(comma);
            children.push(self.result_column()?);
        }
        Ok(clause(ClauseKind::Select, children))
    }

    // Result columns are flattened into the SELECT clause: expr [Alias].
    fn result_column(&mut self) -> Result<Node, ParseError> {
        if self.at_symbol("*") {
            self.pos += 1;
            return Ok(Node::leaf(TokenClass::Star, "*"));
        }
        let expr = self.expr()?;
        match self.alias()? {
            Some(alias) => Ok(Node::branch(NodeKind::Expression, vec![expr, alias])),
            None => Ok(expr),
        }
    }

    fn alias(&mut self) -> Result<Option<Node>, ParseError> {
        let as_kw = self.eat_keyword("AS");
        if as_kw.is_none() && !self.at_ident() {
            return Ok(None);
        }
        let name = self.ident()?;
        Ok(Some(Node::branch(NodeKind::Alias, vec![Node::Leaf(Token::keyword("AS")), name])))
    }

    fn parse_from(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("FROM")?];
        self.comma_list(&mut children, Self::table_ref)?;
        Ok(clause(ClauseKind::From, children))
    }

    fn table_ref(&mut self) -> Result<Node, ParseError> {
        let object = if self.at_symbol("(") {
            let open = self.expect_punct("(")?;
            let sub = self.statement()?;
            let close = self.expect_punct(")")?;
            Node::branch(NodeKind::Expression, vec![open, sub, close])
        } else {
            self.ident().map_err(|_| self.error("table name"))?
        };
        let mut children = vec![object];
        if let Some(alias) = self.alias()? {
            children.push(alias);
        }
        Ok(Node::branch(NodeKind::TableRef, children))
    }

    fn join_clause(&mut self) -> Result<Node, ParseError> {
        let mut children = Vec::new();
        if let Some(n) = self.eat_keyword("NATURAL") {
            children.push(n);
        }
        for side in ["LEFT", "RIGHT", "FULL"] {
            if let Some(kw) = self.eat_keyword(side) {
                children.push(kw);
                if let Some(outer) = self.eat_keyword("OUTER") {
                    children.push(outer);
                }
                break;
            }
        }
        if children.is_empty() {
            if let Some(kw) = self.eat_keyword("INNER").or_else(|| self.eat_keyword("CROSS")) {
                children.push(kw);
            }
        }
        children.push(self.expect_keyword("JOIN")?);
        children.push(self.table_ref()?);
        if let Some(on) = self.eat_keyword("ON") {
            children.push(on);
            children.push(self.expr()?);
        }
        Ok(clause(ClauseKind::Join, children))
    }

    fn order_by(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("ORDER")?, self.expect_keyword("BY")?];
        loop {
            children.push(self.expr()?);
            if let Some(dir) = self.eat_keyword("ASC").or_else(|| self.eat_keyword("DESC")) {
                children.push(dir);
            }
            match self.eat_punct(",") {
                Some(comma) => children.push(comma),
                None => break,
            }
        }
        Ok(clause(ClauseKind::OrderBy, children))
    }

    fn limit(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("LIMIT")?, self.expr()?];
        if let Some(sep) = self.eat_keyword("OFFSET").or_else(|| self.eat_punct(",")) {
            children.push(sep);
            children.push(self.expr()?);
        }
        Ok(clause(ClauseKind::Limit, children))
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut left = self.and_expr()?;
        while let Some(op) = self.eat_keyword("OR") {
            let right = self.and_expr()?;
            left = Node::branch(NodeKind::Expression, vec![left, op, right]);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Node, ParseError> {
        let mut left = self.not_expr()?;
        while let Some(op) = self.eat_keyword("AND") {
            let right = self.not_expr()?;
            left = Node::branch(NodeKind::Expression, vec![left, op, right]);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Node, ParseError> {
        if let Some(not) = self.eat_keyword("NOT") {
            let operand = self.not_expr()?;
            return Ok(Node::branch(NodeKind::Unary, vec![not, operand]));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Node, ParseError> {
        let mut left = self.additive()?;
        loop {
            if let Some(op) =
                self.peek().filter(|t| t.kind == LexKind::Symbol && COMPARISON_OPS.contains(&t.text.as_str()))
            {
                let op = Node::leaf(TokenClass::Operator, op.text.clone());
                self.pos += 1;
                let right = self.additive()?;
                left = Node::branch(NodeKind::Expression, vec![left, op, right]);
                continue;
            }
            let negated = self.at_word("NOT")
                && self.peek_at(1).is_some_and(|t| ["IN", "LIKE", "GLOB", "BETWEEN"].iter().any(|w| t.is_word(w)));
            let mut children = vec![left];
            if negated {
                children.push(self.expect_keyword("NOT")?);
            }
            if let Some(kw) = self.eat_keyword("IN") {
                children.push(kw);
                children.push(self.in_rhs()?);
            } else if let Some(kw) = self.eat_keyword("LIKE").or_else(|| self.eat_keyword("GLOB")) {
                children.push(kw);
                children.push(self.additive()?);
                if let Some(esc) = self.eat_keyword("ESCAPE") {
                    children.push(esc);
                    children.push(self.additive()?);
                }
            } else if let Some(kw) = self.eat_keyword("BETWEEN") {
                children.push(kw);
                children.push(self.additive()?);
                children.push(self.expect_keyword("AND")?);
                children.push(self.additive()?);
            } else if let Some(kw) = self.eat_keyword("IS") {
                children.push(kw);
                if let Some(not) = self.eat_keyword("NOT") {
                    children.push(not);
                }
                children.push(self.additive()?);
            } else {
                return Ok(children.pop().expect("left operand"));
            }
            left = Node::branch(NodeKind::Expression, children);
        }
    }

    fn in_rhs(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_punct("(")?];
        if self.at_word("SELECT") {
            children.push(self.statement()?);
        } else {
            self.comma_list(&mut children, Self::expr)?;
        }
        children.push(self.expect_punct(")")?);
        Ok(Node::branch(NodeKind::Expression, children))
    }

    fn additive(&mut self) -> Result<Node, ParseError> {
        let mut left = self.multiplicative()?;
        while let Some(op) = self.eat_operator(&["+", "-", "||"]) {
            let right = self.multiplicative()?;
            left = Node::branch(NodeKind::Expression, vec![left, op, right]);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Node, ParseError> {
        let mut left = self.unary()?;
        while let Some(op) = self.eat_operator(&["*", "/", "%"]) {
            let right = self.unary()?;
            left = Node::branch(NodeKind::Expression, vec![left, op, right]);
        }
        Ok(left)
    }

    fn eat_operator(&mut self, ops: &[&str]) -> Option<Node> {
        let tok = self.peek().filter(|t| t.kind == LexKind::Symbol && ops.contains(&t.text.as_str()))?;
        let node = Node::leaf(TokenClass::Operator, tok.text.clone());
        self.pos += 1;
        Some(node)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some(op) = self.eat_operator(&["-", "+"]) {
            let operand = self.unary()?;
            return Ok(Node::branch(NodeKind::Unary, vec![op, operand]));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("expression"));
        };
        match &tok.kind {
            LexKind::Number => {
                self.pos += 1;
                Ok(Node::leaf(TokenClass::NumericLiteral, tok.text))
            }
            LexKind::Str => {
                self.pos += 1;
                Ok(Node::leaf(TokenClass::StringLiteral, tok.text))
            }
            LexKind::Placeholder(ft @ (FillType::NumValue | FillType::StrValue)) => {
                self.pos += 1;
                Ok(Node::Placeholder(*ft))
            }
            LexKind::Symbol if tok.text == "(" => {
                let open = self.expect_punct("(")?;
                let inner = if self.at_word("SELECT") { self.statement()? } else { self.expr()? };
                let close = self.expect_punct(")")?;
                Ok(Node::branch(NodeKind::Expression, vec![open, inner, close]))
            }
            LexKind::Word if tok.is_word("NULL") => {
                self.pos += 1;
                Ok(Node::Leaf(Token::keyword("NULL")))
            }
            LexKind::Word if tok.is_word("EXISTS") => {
                let kw = self.expect_keyword("EXISTS")?;
                let open = self.expect_punct("(")?;
                let sub = self.statement()?;
                let close = self.expect_punct(")")?;
                Ok(Node::branch(
                    NodeKind::Expression,
                    vec![kw, Node::branch(NodeKind::Expression, vec![open, sub, close])],
                ))
            }
            LexKind::Word if tok.is_word("CASE") => self.case_expr(),
            LexKind::Word if tok.is_word("CAST") => self.cast_expr(),
            LexKind::Word if !is_keyword(&tok.text) && self.peek_at(1).is_some_and(|t| t.is_symbol("(")) => {
                self.function_call()
            }
            _ if is_ident_token(&tok) => self.column_ref(),
            _ => Err(self.error("expression")),
        }
    }

    fn column_ref(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.ident()?];
        if let Some(dot) = self.eat_punct(".") {
            children.push(dot);
            if self.at_symbol("*") {
                self.pos += 1;
                children.push(Node::leaf(TokenClass::Star, "*"));
            } else {
                children.push(self.ident().map_err(|_| self.error("column name"))?);
            }
        }
        Ok(Node::branch(NodeKind::ColumnRef, children))
    }

    fn function_call(&mut self) -> Result<Node, ParseError> {
        let tok = self.peek().cloned().expect("caller checked");
        self.pos += 1;
        let name = if is_known_function(&tok.text) { tok.text.to_ascii_uppercase() } else { tok.text };
        let mut children = vec![Node::leaf(TokenClass::FunctionName, name), self.expect_punct("(")?];
        if self.at_symbol("*") {
            self.pos += 1;
            children.push(Node::leaf(TokenClass::Star, "*"));
        } else if !self.at_symbol(")") {
            if let Some(d) = self.eat_keyword("DISTINCT") {
                children.push(d);
            }
            self.comma_list(&mut children, Self::expr)?;
        }
        children.push(self.expect_punct(")")?);
        Ok(Node::branch(NodeKind::FunctionCall, children))
    }

    fn cast_expr(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("CAST")?, self.expect_punct("(")?, self.expr()?];
        children.push(self.expect_keyword("AS")?);
        let mut any = false;
        while let Some(t) = self.peek().filter(|t| t.kind == LexKind::Word) {
            children.push(Node::Leaf(Token::keyword(&t.text)));
            self.pos += 1;
            any = true;
        }
        if !any {
            return Err(self.error("type name"));
        }
        children.push(self.expect_punct(")")?);
        Ok(Node::branch(NodeKind::FunctionCall, children))
    }

    fn case_expr(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.expect_keyword("CASE")?];
        if !self.at_word("WHEN") {
            children.push(self.expr()?);
        }
        let mut arms = 0;
        while let Some(when) = self.eat_keyword("WHEN") {
            children.push(when);
            children.push(self.expr()?);
            children.push(self.expect_keyword("THEN")?);
            children.push(self.expr()?);
            arms += 1;
        }
        if arms == 0 {
            return Err(self.error("WHEN"));
        }
        if let Some(e) = self.eat_keyword("ELSE") {
            children.push(e);
            children.push(self.expr()?);
        }
        children.push(self.expect_keyword("END")?);
        Ok(Node::branch(NodeKind::Expression, children))
    }
}

fn clause(kind: ClauseKind, children: Vec<Node>) -> Node {
    Node::branch(NodeKind::Clause(kind), children)
}

fn is_ident_token(t: &LexToken) -> bool {
    match t.kind {
        LexKind::Word => !is_keyword(&t.text),
        LexKind::QuotedIdent => true,
        LexKind::Placeholder(ft) => ft.is_identifier(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use crate::ast::{parse_sql, parse_template_text, render_node, render_sql};

    fn roundtrip(sql: &str) -> String {
        let first = parse_sql(sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
        let text = render_sql(&first);
        let second = parse_sql(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(first, second, "{sql}");
        text
    }

    #[test]
    fn supported_shapes() {
        let cases = [
            ("SELECT count(*) FROM singer", "SELECT COUNT(*) FROM singer"),
            (
                "SELECT DISTINCT country FROM singer WHERE age > 20",
                "SELECT DISTINCT country FROM singer WHERE age > 20",
            ),
            (
                "SELECT name FROM singer WHERE singer_id NOT IN (SELECT singer_id FROM singer_in_concert)",
                "SELECT name FROM singer WHERE singer_id NOT IN (SELECT singer_id FROM singer_in_concert)",
            ),
            (
                "select a from t where b like '%x%' and c between 1 and 5",
                "SELECT a FROM t WHERE b LIKE '%x%' AND c BETWEEN 1 AND 5",
            ),
            ("SELECT name FROM a INTERSECT SELECT name FROM b", "SELECT name FROM a INTERSECT SELECT name FROM b"),
            ("SELECT T1.* FROM t AS T1", "SELECT T1.* FROM t AS T1"),
            ("SELECT a FROM t u", "SELECT a FROM t AS u"),
            (
                "SELECT count(*) cnt FROM t GROUP BY a HAVING count(*) >= 2",
                "SELECT COUNT(*) AS cnt FROM t GROUP BY a HAVING COUNT(*) >= 2",
            ),
            ("SELECT a FROM t WHERE b = \"Alice\"", "SELECT a FROM t WHERE b = 'Alice'"),
            (
                "SELECT a FROM t ORDER BY b DESC, c LIMIT 3 OFFSET 1",
                "SELECT a FROM t ORDER BY b DESC, c LIMIT 3 OFFSET 1",
            ),
            (
                "SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END FROM t",
                "SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END FROM t",
            ),
            ("SELECT CAST(a AS real) / 2 FROM t", "SELECT CAST(a AS REAL) / 2 FROM t"),
            ("SELECT a FROM t WHERE b = -5", "SELECT a FROM t WHERE b = -5"),
            (
                "SELECT a FROM t WHERE NOT EXISTS (SELECT 1 FROM u)",
                "SELECT a FROM t WHERE NOT EXISTS (SELECT 1 FROM u)",
            ),
            ("SELECT `County Name` FROM schools", "SELECT `County Name` FROM schools"),
            ("SELECT a FROM (SELECT a FROM t) AS s", "SELECT a FROM (SELECT a FROM t) AS s"),
            ("SELECT a FROM x LEFT OUTER JOIN y ON x.k = y.k", "SELECT a FROM x LEFT OUTER JOIN y ON x.k = y.k"),
            ("SELECT a FROM t WHERE b IS NOT NULL;", "SELECT a FROM t WHERE b IS NOT NULL"),
            (
                "SELECT a FROM t UNION ALL SELECT b FROM u ORDER BY 1",
                "SELECT a FROM t UNION ALL SELECT b FROM u ORDER BY 1",
            ),
            ("SELECT my_udf(a, 2) FROM t", "SELECT my_udf(a, 2) FROM t"),
            ("SELECT a || ' ' || b FROM t", "SELECT a || ' ' || b FROM t"),
            ("SELECT `order` FROM `group`", "SELECT `order` FROM `group`"),
        ];
        for (input, expected) in cases {
            assert_eq!(roundtrip(input), expected);
        }
    }

    #[test]
    fn rejects_outside_subset() {
        for sql in [
            "INSERT INTO t VALUES (1)",
            "UPDATE t SET a = 1",
            "DELETE FROM t",
            "CREATE TABLE t(a INTEGER)",
            "WITH c AS (SELECT 1) SELECT * FROM c",
            "SELECT a FROM t JOIN u USING (k)",
            "SELECT a FROM t; SELECT b FROM u",
            "SELECT a FROM t WHERE",
            "SELECT CASE END FROM t",
            "",
        ] {
            assert!(parse_sql(sql).is_err(), "{sql}");
        }
    }

    #[test]
    fn error_offsets_point_at_offending_token() {
        assert_eq!(parse_sql("INSERT INTO t VALUES (1)").unwrap_err().offset, 0);
        let e = parse_sql("SELECT a FROM t JOIN u USING (k)").unwrap_err();
        assert_eq!(e.offset, 23);
        assert_eq!(parse_sql("SELECT a FROM").unwrap_err().offset, 13);
    }

    #[test]
    fn placeholders_only_in_template_mode() {
        let t = parse_template_text("SELECT [column] FROM [table] WHERE [column] > [number]").unwrap();
        assert_eq!(render_node(&t), "SELECT [column] FROM [table] WHERE [column] > [number]");
        let sql = parse_sql("SELECT [column] FROM [table]").unwrap();
        assert_eq!(render_sql(&sql), "SELECT column FROM `table`");
    }
}
