//! Pipeline stages above the chemistry and numerics layers: description
//! prompting, the graph and text encoders, contrastive alignment and
//! downstream fine-tuning.

pub mod alignment;
pub mod downstream;
pub mod encoders;
pub mod prompting;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Classification,
    Regression,
}
