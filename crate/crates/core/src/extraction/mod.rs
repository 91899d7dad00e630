//! Turning note text into entity spans.

mod grammar;
mod predictions;
pub mod segment;
mod status;
mod tokenize;

pub use grammar::{
    extract_entities, Extraction, ExtractionMode, Extractor, ExtractorConfig, GrammarExtractor,
    Statement,
};
pub use predictions::{load_external_predictions, parse_external_predictions, PredictionError};
pub use status::detect_status_rulebased;
pub use tokenize::{reconstruct, tokenize, Token};
