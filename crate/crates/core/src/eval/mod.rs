//! Answer metrics, module faithfulness, compositional splits and run comparison.

mod compare;
mod faithfulness;
mod metrics;
mod report;
mod split;

use alloc::string::String;

use crate::dsl::NodePath;
use crate::executor::ExecError;

pub use compare::{compare_runs, Comparison, MeanStd, SeedDelta};
pub use faithfulness::{faithfulness, node_faithfulness, FaithfulnessReport, FaithfulnessTally, NodeScore, FAITHFULNESS_EPS};
pub use metrics::{answer_metrics, item_scores, Answer, AnswerMetrics};
pub use report::{evaluate, predict, EvalReport, Prediction};
pub use split::{build_comp_split, CompSplit, SplitSpec};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {golds} gold answers")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("trace has no node at {0}")]
    MissingNode(NodePath),
    #[error("cannot compare runs on split `{a}` with runs on split `{b}`")]
    SplitMismatch { a: String, b: String },
    #[error("{0}")]
    Split(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}
