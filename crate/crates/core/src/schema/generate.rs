//! Model-written schemas, accepted only when they support the SQL.

use serde::{Deserialize, Serialize};

use crate::ast::SqlAst;
use crate::foundry::strip_fences;
use crate::gateway::{GatewayError, LlmGateway};
use crate::prompt::generate_schema_prompt;

use super::{check_consistency, read_ddl, ConsistencyReport, DdlError, Schema};

/// Why one schema reply was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "kebab-case")]
pub enum SchemaAttempt {
    Ddl { detail: String },
    Inconsistent { report: ConsistencyReport },
}

impl SchemaAttempt {
    pub fn code(&self) -> &'static str {
        match self {
            SchemaAttempt::Ddl { .. } => "ddl",
            SchemaAttempt::Inconsistent { .. } => "schema-inconsistent",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            SchemaAttempt::Ddl { detail } => detail.clone(),
            SchemaAttempt::Inconsistent { report } => {
                report.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaGenError {
    #[error("schema generation failed after {} attempt(s)", attempts.len())]
    SchemaGenerationFailed {
        attempts: Vec<SchemaAttempt>,
        /// Consistency report of the last reply that parsed, if any did.
        last_report: Option<ConsistencyReport>,
    },
    #[error("domain is empty")]
    EmptyDomain,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<DdlError> for SchemaAttempt {
    fn from(e: DdlError) -> Self {
        SchemaAttempt::Ddl { detail: e.to_string() }
    }
}

/// Asks the model for CREATE TABLE statements, retrying until a reply reads
/// as DDL and passes the consistency check, for at most `budget` attempts.
/// Returns the schema with the rejected attempts that preceded it.
pub fn generate_schema(
    domain: &str,
    sql: &SqlAst,
    gateway: &LlmGateway,
    budget: u32,
    scope: Option<&str>,
) -> Result<(Schema, Vec<SchemaAttempt>), SchemaGenError> {
    if domain.trim().is_empty() {
        return Err(SchemaGenError::EmptyDomain);
    }
    let prompt = generate_schema_prompt(domain, sql);
    let mut attempts = Vec::new();
    let mut last_report = None;
    for _ in 0..budget.max(1) {
        let reply = gateway.complete_in(&prompt, scope)?;
        let schema = match read_ddl(&strip_fences(&reply)) {
            Ok(s) => s,
            Err(e) => {
                attempts.push(e.into());
                continue;
            }
        };
        let report = check_consistency(&schema, sql);
        if report.is_consistent() {
            return Ok((schema, attempts));
        }
        last_report = Some(report.clone());
        attempts.push(SchemaAttempt::Inconsistent { report });
    }
    Err(SchemaGenError::SchemaGenerationFailed { attempts, last_report })
}
