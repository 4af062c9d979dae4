//! Open-domain question answering with learnable stage prompts.
//!
//! The pipeline runs query expansion, BM25 retrieval, sliding-window
//! listwise reranking and answer generation. Each stage is driven by an
//! LLM role whose prompt can be optimized from question/answer pairs.
//!
//! Numeric kernels are generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64` for orchestration code.

pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod prompt_opt;
pub mod rerank;
pub mod retrieval;
pub mod roles;
pub mod scalar;
pub mod types;

pub use error::{Error, Result};

pub type Score = types::Score<f64>;
pub type Bm25 = retrieval::Bm25Params<f64>;
pub type EvalReport = metrics::EvalReport<f64>;
