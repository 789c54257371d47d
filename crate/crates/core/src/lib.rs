//! Cardinal-phrase guided hierarchical attention for headline incongruence
//! detection, with the supporting text pipeline, autodiff engine, baselines,
//! training loop and metrics.

pub mod attention;
pub mod baselines;
pub mod batch;
pub mod checkpoint;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod params;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod toy;
pub mod train;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use eval::{predict, EvalReport};
pub use graph::{Graph, NodeId};
pub use model::{ModelConfig, ModelKind, Network};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
pub use text::{DatasetRecord, Label, RawRecord};
pub use train::{train, TrainConfig};
