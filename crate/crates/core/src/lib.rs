pub mod ast;
pub mod dataset;
pub mod foundry;
pub mod gateway;
pub mod ledger;
pub mod pipeline;
pub mod prompt;
pub mod schema;
pub mod template;
pub mod validator;
