//! Synthetic training corpus: seed selection, generation and label QA.

mod llm;
mod offline;
mod prompt;
mod qa;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use llm::{
    generate_llm, parse_completion, ChatMessage, ChatRequest, GenerationConfig, LlmGenerator,
};
pub use offline::{demo_seed_corpus, generate_offline, PerturbationSpec};
pub use prompt::{
    build_prompt, prompt_section, trailer_json, PromptConfig, SYSTEM_MESSAGE, TRAILER_PREFIX,
};
pub use qa::{apply_corrections, run_qa, validate_labels, Discrepancy, QaSummary, QaVerdict};

use crate::corpus::{AnnotatedNote, Note};
use crate::extraction::{detect_status_rulebased, ExtractionMode, GrammarExtractor};
use crate::model::{DiagnosisRecord, PeriodontalStatus};
use crate::normalization::record_from_spans;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedTemplate {
    pub note: Note,
    pub status_category: PeriodontalStatus,
    pub embedded_record: DiagnosisRecord,
}

impl SeedTemplate {
    /// Template from a note with a known record; `None` without one.
    pub fn from_gold(note: &AnnotatedNote) -> Option<Self> {
        let record = note.record?;
        Some(SeedTemplate {
            note: note.note.clone(),
            status_category: record.status,
            embedded_record: record,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("not enough seed notes: {}", format_shortfalls(.shortfalls))]
    InsufficientTemplates {
        /// (category, available, required)
        shortfalls: Vec<(PeriodontalStatus, usize, usize)>,
    },
    #[error("{0}")]
    Config(String),
    #[error("template {template} variant {variant}: request failed after {attempts} attempt(s): {message}")]
    Request {
        template: String,
        variant: usize,
        attempts: usize,
        message: String,
    },
}

fn format_shortfalls(s: &[(PeriodontalStatus, usize, usize)]) -> String {
    s.iter()
        .map(|(status, have, need)| {
            format!(
                "{} has {have} of {need} (short by {})",
                status.name(),
                need - have
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

const CATEGORIES: [PeriodontalStatus; 3] = [
    PeriodontalStatus::Periodontitis,
    PeriodontalStatus::Gingivitis,
    PeriodontalStatus::Health,
];

/// Record a template passes on to its generations: the note's own record
/// when it agrees with the category, else whatever the grammar finds, else
/// the bare status.
fn template_record(
    note: &AnnotatedNote,
    category: PeriodontalStatus,
    extractor: &GrammarExtractor,
) -> DiagnosisRecord {
    if let Some(r) = note.record.filter(|r| r.status == category) {
        return r;
    }
    let spans = extractor.run(note.text()).spans;
    record_from_spans(note.text(), &spans)
        .filter(|r| r.status == category)
        .unwrap_or_else(|| DiagnosisRecord::new(category))
}

/// Draws `per_category` notes per status uniformly without replacement.
///
/// Notes are categorized with the rule-based status detector. The result
/// lists Periodontitis, Gingivitis and Health templates in that order, each
/// group in corpus order.
pub fn select_seed_templates(
    corpus: &[AnnotatedNote],
    per_category: usize,
    seed: u64,
) -> Result<Vec<SeedTemplate>, SynthesisError> {
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); CATEGORIES.len()];
    for (i, n) in corpus.iter().enumerate() {
        if let Some(s) = detect_status_rulebased(n.text()) {
            let k = CATEGORIES.iter().position(|&c| c == s).unwrap();
            pools[k].push(i);
        }
    }
    let shortfalls: Vec<_> = CATEGORIES
        .iter()
        .zip(&pools)
        .filter(|(_, p)| p.len() < per_category)
        .map(|(&c, p)| (c, p.len(), per_category))
        .collect();
    if !shortfalls.is_empty() {
        return Err(SynthesisError::InsufficientTemplates { shortfalls });
    }
    let extractor = GrammarExtractor::with_mode(ExtractionMode::Informal);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_category * CATEGORIES.len());
    for (&category, pool) in CATEGORIES.iter().zip(&pools) {
        let mut chosen: Vec<usize> = pool
            .choose_multiple(&mut rng, per_category)
            .copied()
            .collect();
        chosen.sort_unstable();
        for i in chosen {
            out.push(SeedTemplate {
                note: corpus[i].note.clone(),
                status_category: category,
                embedded_record: template_record(&corpus[i], category, &extractor),
            });
        }
    }
    Ok(out)
}
