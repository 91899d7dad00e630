//! Structured periodontal diagnoses from free-text dental notes.
//!
//! The crate covers the full pipeline: the diagnosis model and its validity
//! rules, JSON Lines corpora with standoff spans, synthetic note generation,
//! grammar-based extraction, normalization and adjudication to one record per
//! note, and scoring against gold annotations.

pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod model;
pub mod normalization;
pub mod synthesis;

pub use corpus::{AnnotatedNote, AnnotationSource, Note, PatientMeta, Provenance};
pub use model::{
    DiagnosisRecord, Dimension, EntitySpan, EntityValue, Extent, Grade, PeriodontalStatus, Stage,
    Subtype,
};
