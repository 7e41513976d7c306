//! Fixed keyword and function-name tables for the supported SQLite subset.

/// Bumped whenever either table below changes, since both feed template ids.
pub const KEYWORD_TABLE_VERSION: u32 = 1;

/// Reserved words. A bare word in this list is never an identifier.
pub const KEYWORDS: &[&str] = &[
    "ALL",
    "ALTER",
    "AND",
    "AS",
    "ASC",
    "BETWEEN",
    "BY",
    "CASE",
    "CAST",
    "COLLATE",
    "CREATE",
    "CROSS",
    "DELETE",
    "DESC",
    "DISTINCT",
    "DROP",
    "ELSE",
    "END",
    "ESCAPE",
    "EXCEPT",
    "EXISTS",
    "FROM",
    "FULL",
    "GLOB",
    "GROUP",
    "HAVING",
    "IN",
    "INNER",
    "INSERT",
    "INTERSECT",
    "INTO",
    "IS",
    "JOIN",
    "LEFT",
    "LIKE",
    "LIMIT",
    "NATURAL",
    "NOT",
    "NULL",
    "OFFSET",
    "ON",
    "OR",
    "ORDER",
    "OUTER",
    "OVER",
    "PRAGMA",
    "RIGHT",
    "SELECT",
    "SET",
    "TABLE",
    "THEN",
    "UNION",
    "UPDATE",
    "USING",
    "VALUES",
    "WHEN",
    "WHERE",
    "WITH",
];

/// Built-in functions whose names are normalized to upper case. Any other word
/// in call position is still a function name but keeps its spelling.
pub const KNOWN_FUNCTIONS: &[&str] = &[
    "ABS",
    "AVG",
    "COALESCE",
    "COUNT",
    "DATE",
    "DATETIME",
    "GROUP_CONCAT",
    "IFNULL",
    "IIF",
    "INSTR",
    "JULIANDAY",
    "LENGTH",
    "LOWER",
    "LTRIM",
    "MAX",
    "MIN",
    "NULLIF",
    "RANDOM",
    "REPLACE",
    "ROUND",
    "RTRIM",
    "STRFTIME",
    "SUBSTR",
    "SUBSTRING",
    "SUM",
    "TIME",
    "TOTAL",
    "TRIM",
    "UPPER",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

pub fn is_known_function(word: &str) -> bool {
    KNOWN_FUNCTIONS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Aggregates whose argument is taken as numeric evidence by schema inference.
pub fn is_numeric_aggregate(name: &str) -> bool {
    ["SUM", "AVG", "MIN", "MAX"].iter().any(|k| k.eq_ignore_ascii_case(name))
}
