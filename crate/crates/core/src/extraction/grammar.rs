//! Rule-based diagnosis grammar.
//!
//! A sentence is a diagnosis statement when it opens with an anchor such as
//! `D:`, `D-`, `Diagnosis:` or `Dx:`, or when its first word already belongs
//! to a diagnosis (an extent adjective, a status word, a stage marker or a
//! subtype phrase). Inside a statement the scanner recognizes status words,
//! `Stage <numeral>`, `Grade <letter>`, extent adjectives and subtype phrases.
//!
//! Extent adjectives only yield a span when the next content word is a status
//! word or a stage/grade marker. Anything else ("Generalized Recession")
//! absorbs the adjective.
//!
//! Informal mode additionally accepts bare `III B` pairs and a bare trailing
//! grade letter after a stage marker (`Stage 3 B`).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::segment::sentence_bounds;
use super::tokenize::{token_positions, TokenPos};
use crate::model::{EntitySpan, EntityValue, Grade, PeriodontalStatus, Stage, Subtype};
use crate::normalization::{
    extent_word, fuzzy_lookup, grade_letter, roman_stage, stage_numeral, status_word,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    #[default]
    Strict,
    Informal,
}

impl FromStr for ExtractionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(ExtractionMode::Strict),
            "informal" => Ok(ExtractionMode::Informal),
            other => Err(format!(
                "unknown extraction mode {other:?} (expected strict or informal)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub mode: ExtractionMode,
    /// Anchor words, matched case-insensitively when followed by `:` or `-`.
    pub anchors: Vec<String>,
    /// Phrases marking a statement as hedged.
    pub hedge_terms: Vec<String>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            mode: ExtractionMode::Strict,
            anchors: ["d", "dx", "diagnosis", "diag"].map(String::from).to_vec(),
            hedge_terms: [
                "to be confirmed",
                "tbc",
                "possible",
                "possibly",
                "probable",
                "probably",
                "suspected",
                "likely",
                "rule out",
                "r/o",
                "questionable",
                "pending",
                "provisional",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

impl ExtractorConfig {
    pub fn with_mode(mode: ExtractionMode) -> Self {
        ExtractorConfig {
            mode,
            ..Default::default()
        }
    }
}

/// Anything that turns note text into entity spans.
///
/// Implementations must be deterministic and return non-overlapping spans
/// whose `raw_text` matches the text they cover.
pub trait Extractor {
    fn extract(&self, text: &str) -> Vec<EntitySpan>;
}

/// A recognized diagnosis statement (character offsets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub start: usize,
    pub end: usize,
    pub hedged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub spans: Vec<EntitySpan>,
    pub statements: Vec<Statement>,
}

impl Extraction {
    pub fn hedged(&self) -> bool {
        self.statements.iter().any(|s| s.hedged)
    }
}

#[derive(Debug, Clone)]
pub struct GrammarExtractor {
    config: ExtractorConfig,
    hedges: Vec<Vec<String>>,
}

const MODIFIERS: &[&str] = &[
    "chronic",
    "aggressive",
    "mild",
    "moderate",
    "severe",
    "slight",
    "advanced",
    "early",
    "active",
    "plaque",
    "induced",
    "biofilm",
    "dental",
    "marginal",
    "periodontal",
    "gingival",
];

const SUBTYPE_FILLER: &[&str] = &[
    "in", "a", "an", "with", "of", "history", "patient", "due", "to", "and", "from",
];

impl Default for GrammarExtractor {
    fn default() -> Self {
        Self::new(ExtractorConfig::default())
    }
}

impl GrammarExtractor {
    pub fn new(config: ExtractorConfig) -> Self {
        let hedges = config
            .hedge_terms
            .iter()
            .map(|h| {
                token_positions(h)
                    .iter()
                    .map(|t| t.text(h).to_lowercase())
                    .collect()
            })
            .collect();
        GrammarExtractor { config, hedges }
    }

    pub fn with_mode(mode: ExtractionMode) -> Self {
        Self::new(ExtractorConfig::with_mode(mode))
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn run(&self, text: &str) -> Extraction {
        let toks = token_positions(text);
        let mut scanner = Scanner {
            text,
            toks: &toks,
            informal: self.config.mode == ExtractionMode::Informal,
            spans: Vec::new(),
        };
        let mut statements = Vec::new();
        let mut first = 0;
        for (s_start, s_end) in sentence_bounds(text) {
            while first < toks.len() && toks[first].char_start < s_start {
                first += 1;
            }
            let mut last = first;
            while last < toks.len() && toks[last].char_start < s_end {
                last += 1;
            }
            if let Some(body) = self.statement_body(&scanner, first, last) {
                scanner.scan(body, last);
                let start = toks.get(body).map_or(s_end, |t| t.char_start.min(s_end));
                statements.push(Statement {
                    start,
                    end: s_end,
                    hedged: self.is_hedged(&scanner, body, last),
                });
            }
            first = last;
        }
        Extraction {
            spans: scanner.spans,
            statements,
        }
    }

    fn statement_body(&self, sc: &Scanner<'_>, first: usize, last: usize) -> Option<usize> {
        let mut i = first;
        while i < last && sc.is_punct(i) {
            i += 1;
        }
        for k in i..last.min(i + 4) {
            let lower = sc.lower(k);
            if self
                .config
                .anchors
                .iter()
                .any(|a| a.eq_ignore_ascii_case(&lower))
                && k + 1 < last
                && matches!(sc.word(k + 1), ":" | "-")
            {
                return Some(k + 2);
            }
            if sc.is_punct(k) {
                break;
            }
        }
        if i < last && sc.starts_diagnosis(i, last) {
            return Some(i);
        }
        None
    }

    fn is_hedged(&self, sc: &Scanner<'_>, body: usize, last: usize) -> bool {
        let words: Vec<String> = (body..last).map(|i| sc.lower(i)).collect();
        self.hedges
            .iter()
            .filter(|h| !h.is_empty())
            .any(|h| words.windows(h.len()).any(|w| w == h.as_slice()))
    }
}

impl Extractor for GrammarExtractor {
    fn extract(&self, text: &str) -> Vec<EntitySpan> {
        self.run(text).spans
    }
}

/// Runs the grammar extractor with default anchors and hedges.
pub fn extract_entities(text: &str, mode: ExtractionMode) -> Vec<EntitySpan> {
    GrammarExtractor::with_mode(mode).extract(text)
}

struct Scanner<'a> {
    text: &'a str,
    toks: &'a [TokenPos],
    informal: bool,
    spans: Vec<EntitySpan>,
}

impl<'a> Scanner<'a> {
    fn word(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text(self.text))
    }

    fn lower(&self, i: usize) -> String {
        self.word(i).to_lowercase()
    }

    fn is_punct(&self, i: usize) -> bool {
        let w = self.word(i);
        !w.is_empty() && !w.chars().next().is_some_and(char::is_alphanumeric)
    }

    fn is_keyword(&self, i: usize, keyword: &str) -> bool {
        let w = self.lower(i);
        w.chars().all(char::is_alphabetic) && fuzzy_lookup(&w, &[(keyword, ())]).is_some()
    }

    fn status_at(&self, i: usize) -> Option<PeriodontalStatus> {
        let w = self.word(i);
        if w.is_empty() || !w.chars().all(char::is_alphabetic) {
            return None;
        }
        let status = status_word(w)?;
        if status == PeriodontalStatus::Periodontitis && self.qualified_periodontitis(i) {
            return None;
        }
        Some(status)
    }

    /// "non-periodontitis", "stable periodontitis", "history of periodontitis"
    /// describe a subtype, not the current status.
    fn qualified_periodontitis(&self, i: usize) -> bool {
        if i == 0 {
            return false;
        }
        let prev = self.lower(i - 1);
        if matches!(prev.as_str(), "non" | "stable" | "past" | "treated") {
            return true;
        }
        if i >= 2 {
            let prev2 = self.lower(i - 2);
            if matches!(prev.as_str(), "-" | "/")
                && matches!(prev2.as_str(), "non" | "stable" | "past")
            {
                return true;
            }
            if prev == "of" && prev2 == "history" {
                return true;
            }
        }
        false
    }

    fn push(&mut self, value: EntityValue, start_tok: usize, end_tok: usize) {
        let (a, b) = (self.toks[start_tok], self.toks[end_tok]);
        self.push_raw(value, a.byte_start, b.byte_end, a.char_start, b.char_end);
    }

    fn push_raw(
        &mut self,
        value: EntityValue,
        byte_start: usize,
        byte_end: usize,
        char_start: usize,
        char_end: usize,
    ) {
        self.spans.push(EntitySpan {
            value,
            raw_text: self.text[byte_start..byte_end].to_string(),
            start: char_start,
            end: char_end,
        });
    }

    fn starts_diagnosis(&self, i: usize, last: usize) -> bool {
        let w = self.word(i);
        if w.chars().all(char::is_alphabetic) && extent_word(w).is_some() {
            return true;
        }
        if self.status_at(i).is_some()
            || self.is_keyword(i, "stage")
            || self.subtype_phrase(i, last).is_some()
        {
            return true;
        }
        let lower = self.lower(i);
        if matches!(lower.as_str(), "periodontal" | "gingival")
            && i + 1 < last
            && self.status_at(i + 1).is_some()
        {
            return true;
        }
        self.informal && self.bare_pair(i, last).is_some()
    }

    fn scan(&mut self, mut i: usize, last: usize) {
        while i < last {
            if let Some((next, span)) = self.subtype_phrase(i, last) {
                if let Some((value, end_tok)) = span {
                    self.push(EntityValue::Subtype(value), i, end_tok);
                }
                i = next;
                continue;
            }
            if self.is_keyword(i, "stage") {
                i = self.stage_marker(i, last);
                continue;
            }
            if self.is_keyword(i, "grade") {
                i = self.grade_marker(i, last);
                continue;
            }
            if self.informal {
                if let Some(next) = self.bare_pair(i, last) {
                    self.push_bare_pair(i, last);
                    i = next;
                    continue;
                }
            }
            let w = self.word(i);
            if w.chars().all(char::is_alphabetic) {
                if let Some(extent) = extent_word(w) {
                    if self.head_follows(i + 1, last) {
                        self.push(EntityValue::Extent(extent), i, i);
                    }
                    i += 1;
                    continue;
                }
            }
            if let Some(status) = self.status_at(i) {
                self.push(EntityValue::Status(status), i, i);
            }
            i += 1;
        }
    }

    fn skip_separator(&self, j: usize) -> usize {
        if matches!(self.word(j), ":" | "-") {
            j + 1
        } else {
            j
        }
    }

    /// `Stage <numeral>`, plus `Stage <numeral> <letter>` in informal mode.
    fn stage_marker(&mut self, i: usize, last: usize) -> usize {
        let j = self.skip_separator(i + 1);
        if j >= last {
            return i + 1;
        }
        let w = self.word(j);
        if let Some(stage) = stage_numeral(w) {
            self.push(EntityValue::Stage(stage), j, j);
            if self.informal && j + 1 < last {
                if let Some(grade) = upper_grade(self.word(j + 1)) {
                    self.push(EntityValue::Grade(grade), j + 1, j + 1);
                    return j + 2;
                }
            }
            return j + 1;
        }
        if self.informal {
            if let Some((stage, grade)) = split_pair(w, true) {
                self.push_split_pair(j, stage, grade);
                return j + 1;
            }
        }
        i + 1
    }

    fn grade_marker(&mut self, i: usize, last: usize) -> usize {
        let j = self.skip_separator(i + 1);
        if j < last {
            if let Some(grade) = grade_letter(self.word(j)) {
                self.push(EntityValue::Grade(grade), j, j);
                return j + 1;
            }
        }
        i + 1
    }

    /// Bare `III B` or `IIIB`; returns the index after the pair.
    fn bare_pair(&self, i: usize, last: usize) -> Option<usize> {
        let w = self.word(i);
        if w.chars().all(|c| c.is_ascii_uppercase())
            && roman_stage(w).is_some()
            && i + 1 < last
            && upper_grade(self.word(i + 1)).is_some()
        {
            return Some(i + 2);
        }
        split_pair(w, false).map(|_| i + 1)
    }

    fn push_bare_pair(&mut self, i: usize, last: usize) {
        let w = self.word(i);
        if let Some((stage, grade)) = split_pair(w, false) {
            self.push_split_pair(i, stage, grade);
        } else if let (Some(stage), true) = (roman_stage(w), i + 1 < last) {
            if let Some(grade) = upper_grade(self.word(i + 1)) {
                self.push(EntityValue::Stage(stage), i, i);
                self.push(EntityValue::Grade(grade), i + 1, i + 1);
            }
        }
    }

    /// Splits a fused token such as `3B` into stage and grade spans.
    fn push_split_pair(&mut self, i: usize, stage: Stage, grade: Grade) {
        let t = self.toks[i];
        self.push_raw(
            EntityValue::Stage(stage),
            t.byte_start,
            t.byte_end - 1,
            t.char_start,
            t.char_end - 1,
        );
        self.push_raw(
            EntityValue::Grade(grade),
            t.byte_end - 1,
            t.byte_end,
            t.char_end - 1,
            t.char_end,
        );
    }

    /// Whether the next content word after an extent adjective is a head it
    /// can modify.
    fn head_follows(&self, mut j: usize, last: usize) -> bool {
        while j < last {
            let w = self.lower(j);
            if matches!(w.as_str(), "," | "-" | "/" | ":" | "(") || MODIFIERS.contains(&w.as_str())
            {
                j += 1;
                continue;
            }
            // "localized to generalized periodontitis"
            if matches!(w.as_str(), "and" | "or" | "to")
                && j + 1 < last
                && extent_word(self.word(j + 1)).is_some()
            {
                j += 2;
                continue;
            }
            return self.status_at(j).is_some()
                || self.is_keyword(j, "stage")
                || self.is_keyword(j, "grade")
                || (self.informal && self.bare_pair(j, last).is_some());
        }
        false
    }

    /// Recognizes `intact periodontium` and `reduced periodontium` with an
    /// optional qualifier. Returns the index after the phrase and, when the
    /// subtype is determined, its value and last token.
    #[allow(clippy::type_complexity)]
    fn subtype_phrase(&self, i: usize, last: usize) -> Option<(usize, Option<(Subtype, usize)>)> {
        if i + 1 >= last || !self.is_keyword(i + 1, "periodontium") {
            return None;
        }
        if self.is_keyword(i, "intact") {
            return Some((i + 2, Some((Subtype::IntactPeriodontium, i + 1))));
        }
        if !self.is_keyword(i, "reduced") {
            return None;
        }
        let mut j = i + 2;
        let limit = last.min(j + 6);
        while j < limit {
            let w = self.lower(j);
            if matches!(w.as_str(), "," | ";" | ":" | "(" | "-")
                || SUBTYPE_FILLER.contains(&w.as_str())
            {
                j += 1;
                continue;
            }
            if let Some(end) = self.qualifier(j, last) {
                return Some((end.1 + 1, Some((end.0, end.1))));
            }
            break;
        }
        Some((i + 2, None))
    }

    fn qualifier(&self, j: usize, last: usize) -> Option<(Subtype, usize)> {
        let w = self.lower(j);
        let is_stable = |s: &str| matches!(s, "stable" | "past" | "treated");
        if is_stable(&w) {
            let mut k = j + 1;
            if self.word(k) == "/" && is_stable(&self.lower(k + 1)) {
                k += 2;
            }
            if k < last && self.is_keyword(k, "periodontitis") {
                return Some((Subtype::ReducedPeriodontiumStablePeriodontitis, k));
            }
            return None;
        }
        if w == "nonperiodontitis" {
            return Some((Subtype::ReducedPeriodontiumNonPeriodontitis, j));
        }
        if w == "non" {
            let k = if self.word(j + 1) == "-" {
                j + 2
            } else {
                j + 1
            };
            if k < last && self.is_keyword(k, "periodontitis") {
                return Some((Subtype::ReducedPeriodontiumNonPeriodontitis, k));
            }
        }
        None
    }
}

fn upper_grade(w: &str) -> Option<Grade> {
    if w.len() == 1 && w.chars().all(|c| c.is_ascii_uppercase()) {
        grade_letter(w)
    } else {
        None
    }
}

/// `IIIB`, or with `allow_arabic` also `3B`.
fn split_pair(w: &str, allow_arabic: bool) -> Option<(Stage, Grade)> {
    if w.len() < 2 || !w.is_ascii() {
        return None;
    }
    let (num, letter) = w.split_at(w.len() - 1);
    let grade = upper_grade(letter)?;
    let stage = if num.chars().all(|c| matches!(c, 'I' | 'V')) {
        roman_stage(num)?
    } else if allow_arabic && num.len() == 1 {
        stage_numeral(num)?
    } else {
        return None;
    };
    Some((stage, grade))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dimension, Extent};

    fn values(spans: &[EntitySpan]) -> Vec<(Dimension, String, String)> {
        spans
            .iter()
            .map(|s| {
                (
                    s.dimension(),
                    s.value.canonical().to_string(),
                    s.raw_text.clone(),
                )
            })
            .collect()
    }

    fn v(d: Dimension, value: &str, raw: &str) -> (Dimension, String, String) {
        (d, value.into(), raw.into())
    }

    #[test]
    fn distractor_extent_is_absorbed() {
        let spans = extract_entities(
            "D: Localized Periodontitis Stage I Grade A with Generalized Recession",
            ExtractionMode::Strict,
        );
        assert_eq!(
            values(&spans),
            vec![
                v(Dimension::Extent, "Localized", "Localized"),
                v(Dimension::Status, "Periodontitis", "Periodontitis"),
                v(Dimension::Stage, "I", "I"),
                v(Dimension::Grade, "A", "A"),
            ]
        );
    }

    #[test]
    fn sentence_initial_statement() {
        let spans = extract_entities("Generalized Stage 3 Grade B", ExtractionMode::Strict);
        assert_eq!(
            values(&spans),
            vec![
                v(Dimension::Extent, "Generalized", "Generalized"),
                v(Dimension::Stage, "III", "3"),
                v(Dimension::Grade, "B", "B"),
            ]
        );
    }

    #[test]
    fn informal_bare_pair() {
        let text = "Generalized III B";
        assert_eq!(
            values(&extract_entities(text, ExtractionMode::Informal)),
            vec![
                v(Dimension::Extent, "Generalized", "Generalized"),
                v(Dimension::Stage, "III", "III"),
                v(Dimension::Grade, "B", "B"),
            ]
        );
        assert!(extract_entities(text, ExtractionMode::Strict).is_empty());
    }

    #[test]
    fn informal_trailing_letter_and_fused_tokens() {
        assert_eq!(
            values(&extract_entities("D: Stage 3 B", ExtractionMode::Informal)),
            vec![
                v(Dimension::Stage, "III", "3"),
                v(Dimension::Grade, "B", "B")
            ]
        );
        assert_eq!(
            values(&extract_entities("D: Stage 3 B", ExtractionMode::Strict)),
            vec![v(Dimension::Stage, "III", "3")]
        );
        assert_eq!(
            values(&extract_entities(
                "Dx: generalized IIIB",
                ExtractionMode::Informal
            )),
            vec![
                v(Dimension::Extent, "Generalized", "generalized"),
                v(Dimension::Stage, "III", "III"),
                v(Dimension::Grade, "B", "B"),
            ]
        );
    }

    #[test]
    fn hedged_statement_is_flagged() {
        let ex = GrammarExtractor::default()
            .run("Diagnosis: Stage III Grade B but to be confirmed with radiographs");
        assert_eq!(
            values(&ex.spans),
            vec![
                v(Dimension::Stage, "III", "III"),
                v(Dimension::Grade, "B", "B")
            ]
        );
        assert_eq!(ex.statements.len(), 1);
        assert!(ex.statements[0].hedged);
        let plain = GrammarExtractor::default().run("Diagnosis: Stage III Grade B");
        assert!(!plain.hedged());
    }

    #[test]
    fn empty_and_non_diagnostic_text() {
        assert!(extract_entities("", ExtractionMode::Informal).is_empty());
        assert!(extract_entities(
            "Patient has a history of periodontitis. Recall in 3 months.",
            ExtractionMode::Informal
        )
        .is_empty());
    }

    #[test]
    fn subtype_phrases() {
        let spans = extract_entities(
            "D: Generalized Gingivitis on a Reduced Periodontium, Stable Periodontitis patient",
            ExtractionMode::Strict,
        );
        assert_eq!(
            values(&spans),
            vec![
                v(Dimension::Extent, "Generalized", "Generalized"),
                v(Dimension::Status, "Gingivitis", "Gingivitis"),
                v(
                    Dimension::Subtype,
                    Subtype::ReducedPeriodontiumStablePeriodontitis.name(),
                    "Reduced Periodontium, Stable Periodontitis"
                ),
            ]
        );
        let spans = extract_entities(
            "Periodontal health on a reduced periodontium in a non-periodontitis patient.",
            ExtractionMode::Strict,
        );
        assert_eq!(spans.len(), 2);
        assert_eq!(
            spans[0].value,
            EntityValue::Status(PeriodontalStatus::Health)
        );
        assert_eq!(
            spans[1].value,
            EntityValue::Subtype(Subtype::ReducedPeriodontiumNonPeriodontitis)
        );
        assert_eq!(
            spans[1].raw_text,
            "reduced periodontium in a non-periodontitis"
        );
    }

    #[test]
    fn typos_are_recognized() {
        let spans = extract_entities(
            "D- Generalzed Periodontitsi Stage IV Grade C",
            ExtractionMode::Strict,
        );
        // "Periodontitsi" is two edits away and is not read as a status
        assert_eq!(
            values(&spans),
            vec![
                v(Dimension::Stage, "IV", "IV"),
                v(Dimension::Grade, "C", "C")
            ]
        );
        let spans = extract_entities(
            "D- Generalzed Periodontitiss Stage IV Grade C",
            ExtractionMode::Strict,
        );
        assert_eq!(spans[0].value, EntityValue::Extent(Extent::Generalized));
        assert_eq!(
            spans[1].value,
            EntityValue::Status(PeriodontalStatus::Periodontitis)
        );
    }

    #[test]
    fn anchor_after_leading_words() {
        let spans = extract_entities(
            "Periodontal Diagnosis: localized gingivitis",
            ExtractionMode::Strict,
        );
        assert_eq!(spans.len(), 2);
    }

    #[test]
    fn extent_conjunction_attaches_both() {
        let spans = extract_entities(
            "D: Localized to generalized periodontitis",
            ExtractionMode::Strict,
        );
        assert_eq!(
            values(&spans),
            vec![
                v(Dimension::Extent, "Localized", "Localized"),
                v(Dimension::Extent, "Generalized", "generalized"),
                v(Dimension::Status, "Periodontitis", "periodontitis"),
            ]
        );
    }

    #[test]
    fn multibyte_text_offsets() {
        let text = "Évaluation complète.\nD: Généralisé… Localized Gingivitis";
        let spans = extract_entities(text, ExtractionMode::Strict);
        crate::model::check_spans(text, &spans).unwrap();
        assert_eq!(spans.len(), 2);
    }
}
