//! Reading and writing the subset of MiniZinc data files used by the corpus.

mod json;
mod parse;
mod serialize;
mod value;

pub use json::{bindings_from_json, bindings_serde, bindings_to_json, value_from_json, value_to_json, JsonValueError};
pub use parse::parse_dzn;
pub use serialize::{serialize, value_to_dzn};
pub use value::{Array, Bindings, IndexRange, IntSet, ShapeError, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DznError {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("symbol `{0}` is bound more than once")]
    DuplicateBinding(String),
}
