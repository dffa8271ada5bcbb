pub mod eval;
pub mod extract;
pub mod interfaces;
pub mod launch;
pub mod model;
pub mod pipeline;
pub mod puml;
pub mod synthesis;
