pub mod error;
pub mod ingest;
pub mod model;
pub mod stats;
pub mod analyzer;
pub mod discovery;
pub mod fixture;
pub mod lexicon;
pub mod refine;
pub mod eval;
pub mod output;
pub mod run;
