pub mod engine;
pub mod instance;
pub mod learners;
pub mod changedetect;
pub mod sketch;
pub mod textpipe;
pub mod eval;
pub mod flow;
pub mod vht;
pub mod cli;
