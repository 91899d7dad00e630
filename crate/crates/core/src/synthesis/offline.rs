//! Deterministic offline note generator.
//!
//! Stands in for the LLM so that the whole pipeline runs hermetically. Each
//! note wraps one diagnosis sentence in clinical filler drawn from fixed
//! phrase banks, and carries gold spans plus the record of its template.
//! Perturbations reproduce the failure modes seen in real notes: typos,
//! informal stage/grade formats, anchor variants, secondary diagnoses and
//! extent adjectives attached to non-diagnostic findings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SeedTemplate;
use crate::corpus::{AnnotatedNote, AnnotationSource, Note, Provenance};
use crate::model::{
    DiagnosisRecord, EntitySpan, EntityValue, Extent, Grade, PeriodontalStatus, Stage, Subtype,
};
use crate::normalization::adjudicate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub typo_rate: f64,
    pub informal_format_rate: f64,
    pub anchor_variation_rate: f64,
    pub multi_diagnosis_rate: f64,
    pub distractor_extent_rate: f64,
    pub rng_seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec::clean(0)
    }
}

impl PerturbationSpec {
    /// All rates zero.
    pub fn clean(rng_seed: u64) -> Self {
        PerturbationSpec::uniform(0.0, rng_seed)
    }

    pub fn uniform(rate: f64, rng_seed: u64) -> Self {
        PerturbationSpec {
            typo_rate: rate,
            informal_format_rate: rate,
            anchor_variation_rate: rate,
            multi_diagnosis_rate: rate,
            distractor_extent_rate: rate,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [
            ("typo_rate", self.typo_rate),
            ("informal_format_rate", self.informal_format_rate),
            ("anchor_variation_rate", self.anchor_variation_rate),
            ("multi_diagnosis_rate", self.multi_diagnosis_rate),
            ("distractor_extent_rate", self.distractor_extent_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.typo_rate == 0.0
            && self.informal_format_rate == 0.0
            && self.anchor_variation_rate == 0.0
            && self.multi_diagnosis_rate == 0.0
            && self.distractor_extent_rate == 0.0
    }
}

const OPENERS: &[&str] = &[
    "Pt presents for periodontal evaluation.",
    "Pt presents for comprehensive periodontal exam.",
    "Patient here for periodontal re-evaluation after initial therapy.",
    "Pt reports bleeding when brushing.",
    "Pt referred by general dentist for perio consult.",
    "Chief complaint: sensitivity on lower anteriors.",
    "New patient exam completed today.",
    "Pt returns for 4 month maintenance visit.",
];

const HISTORY: &[&str] = &[
    "Medical history reviewed, no changes.",
    "Med hx: controlled hypertension, no known drug allergies.",
    "Non-smoker.",
    "Former smoker, quit 5 years ago.",
    "Type 2 diabetes, last HbA1c 6.8%.",
    "No current medications reported.",
];

const FINDINGS: &[&str] = &[
    "Probing depths 2-3 mm throughout.",
    "Probing depths 4-6 mm in posterior sextants with BOP.",
    "BOP at 18% of sites.",
    "BOP at 42% of sites, heavy plaque on lingual surfaces.",
    "FMX reviewed, horizontal bone loss noted in molar areas.",
    "Radiographs show crestal bone at normal levels.",
    "Class I mobility on #24 and #25.",
    "Furcation involvement on #3 and #14.",
    "Moderate subgingival calculus on lower anteriors.",
    "Tissue pink and firm with minimal bleeding.",
    "Marginal erythema and edema noted on facial surfaces.",
    "Full mouth periodontal charting completed.",
];

const PLANS: &[&str] = &[
    "OHI given, pt to floss daily.",
    "Plan: SRP UR and LR quadrants, re-eval in 6 weeks.",
    "Plan: adult prophylaxis and recall in 6 months.",
    "Next visit: 3 month periodontal maintenance.",
    "Discussed treatment options, pt agrees to plan.",
    "Rx chlorhexidine rinse, use twice daily for 2 weeks.",
    "Refer back to general dentist for restorative needs.",
];

const DISTRACTOR_NOUNS: &[&str] = &[
    "Recession",
    "Gingival Recession",
    "Bone Loss",
    "Attrition",
    "Abrasion",
    "Calculus Deposits",
];

const ANCHORS: &[&str] = &["D: ", "D- ", "Diagnosis: ", "Dx: ", ""];

/// Builds text while recording entity spans in character offsets.
#[derive(Default)]
struct Builder {
    text: String,
    chars: usize,
    spans: Vec<EntitySpan>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn entity(&mut self, value: EntityValue, s: &str) {
        let start = self.chars;
        self.push(s);
        self.spans.push(EntitySpan {
            value,
            raw_text: s.to_string(),
            start,
            end: self.chars,
        });
    }
}

/// One piece of a rendered diagnosis clause.
#[derive(Clone)]
enum Piece {
    Text(String),
    Entity(EntityValue, String),
    /// A stage/grade keyword that may receive a typo but is not a span.
    Keyword(String),
}

fn txt(s: &str) -> Piece {
    Piece::Text(s.to_string())
}

fn ent(v: EntityValue, s: &str) -> Piece {
    Piece::Entity(v, s.to_string())
}

fn subtype_pieces(subtype: Subtype, rng: &mut ChaCha8Rng) -> Vec<Piece> {
    let v = EntityValue::Subtype(subtype);
    match subtype {
        Subtype::IntactPeriodontium => {
            let phrase = *["Intact Periodontium", "intact periodontium"]
                .choose(rng)
                .unwrap();
            vec![txt(" on an "), ent(v, phrase)]
        }
        Subtype::ReducedPeriodontiumStablePeriodontitis => {
            let phrase = *[
                "Reduced Periodontium, Stable Periodontitis",
                "reduced periodontium; past/stable periodontitis",
            ]
            .choose(rng)
            .unwrap();
            vec![txt(" on a "), ent(v, phrase), txt(" patient")]
        }
        Subtype::ReducedPeriodontiumNonPeriodontitis => {
            let phrase = *[
                "Reduced Periodontium, Non-Periodontitis",
                "reduced periodontium in a non-periodontitis",
            ]
            .choose(rng)
            .unwrap();
            vec![txt(" on a "), ent(v, phrase), txt(" patient")]
        }
    }
}

/// Canonical phrase: `<Extent> <Status> Stage <Roman> Grade <Letter>` for
/// periodontitis, `<Extent> Gingivitis on ...` and `Gingival Health on ...`.
fn canonical_clause(r: &DiagnosisRecord, rng: &mut ChaCha8Rng) -> Vec<Piece> {
    let mut p = Vec::new();
    if let Some(e) = r.extent {
        p.push(ent(EntityValue::Extent(e), e.name()));
        p.push(txt(" "));
    }
    match r.status {
        PeriodontalStatus::Periodontitis => {
            p.push(ent(EntityValue::Status(r.status), "Periodontitis"));
            if let Some(s) = r.stage {
                p.push(txt(" "));
                p.push(Piece::Keyword("Stage".into()));
                p.push(txt(" "));
                p.push(ent(EntityValue::Stage(s), s.roman()));
            }
            if let Some(g) = r.grade {
                p.push(txt(" "));
                p.push(Piece::Keyword("Grade".into()));
                p.push(txt(" "));
                p.push(ent(EntityValue::Grade(g), g.letter()));
            }
        }
        PeriodontalStatus::Gingivitis => {
            p.push(ent(EntityValue::Status(r.status), "Gingivitis"));
            if let Some(st) = r.subtype {
                p.extend(subtype_pieces(st, rng));
            }
        }
        PeriodontalStatus::Health => {
            let prefix = *["Gingival ", "Periodontal "].choose(rng).unwrap();
            p.push(txt(prefix));
            p.push(ent(EntityValue::Status(r.status), "Health"));
            if let Some(st) = r.subtype {
                p.extend(subtype_pieces(st, rng));
            }
        }
    }
    p
}

/// `Generalized III B`, `Generalized Stage 3 B` or `Generalized Stage 3 Grade B`.
fn informal_clause(
    extent: Option<Extent>,
    stage: Stage,
    grade: Grade,
    rng: &mut ChaCha8Rng,
) -> Vec<Piece> {
    let mut p = Vec::new();
    if let Some(e) = extent {
        p.push(ent(EntityValue::Extent(e), e.name()));
        p.push(txt(" "));
    }
    let arabic = stage.arabic().to_string();
    match rng.gen_range(0..3) {
        0 => {
            if extent.is_none() {
                p.push(ent(
                    EntityValue::Status(PeriodontalStatus::Periodontitis),
                    "Periodontitis",
                ));
                p.push(txt(" "));
            }
            p.push(ent(EntityValue::Stage(stage), stage.roman()));
            p.push(txt(" "));
            p.push(ent(EntityValue::Grade(grade), grade.letter()));
        }
        1 => {
            p.push(Piece::Keyword("Stage".into()));
            p.push(txt(" "));
            p.push(ent(EntityValue::Stage(stage), &arabic));
            p.push(txt(" "));
            p.push(ent(EntityValue::Grade(grade), grade.letter()));
        }
        _ => {
            p.push(Piece::Keyword("Stage".into()));
            p.push(txt(" "));
            p.push(ent(EntityValue::Stage(stage), &arabic));
            p.push(txt(" "));
            p.push(Piece::Keyword("Grade".into()));
            p.push(txt(" "));
            p.push(ent(EntityValue::Grade(grade), grade.letter()));
        }
    }
    p
}

/// Applies one Levenshtein edit (substitution, deletion or insertion of a
/// lowercase letter) at a non-initial position.
fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    loop {
        let mut out = chars.clone();
        let pos = rng.gen_range(1..chars.len());
        let letter = (b'a' + rng.gen_range(0..26u8)) as char;
        match rng.gen_range(0..3) {
            0 => out[pos] = letter,
            1 => {
                out.remove(pos);
            }
            _ => out.insert(pos, letter),
        }
        let s: String = out.into_iter().collect();
        if s.to_lowercase() != word.to_lowercase() {
            return s;
        }
    }
}

/// Puts a typo into one status/extent word, falling back to a stage/grade
/// keyword when the clause has none.
fn inject_typo(pieces: &mut [Piece], rng: &mut ChaCha8Rng) -> bool {
    let words: Vec<usize> = pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            matches!(p, Piece::Entity(EntityValue::Status(_) | EntityValue::Extent(_), s) if s.chars().count() >= 5)
        })
        .map(|(i, _)| i)
        .collect();
    let targets = if words.is_empty() {
        pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Piece::Keyword(_)))
            .map(|(i, _)| i)
            .collect()
    } else {
        words
    };
    let Some(&i) = targets.choose(rng) else {
        return false;
    };
    pieces[i] = match &pieces[i] {
        Piece::Entity(v, s) => Piece::Entity(*v, typo(s, rng)),
        Piece::Keyword(s) => Piece::Keyword(typo(s, rng)),
        Piece::Text(s) => Piece::Text(s.clone()),
    };
    true
}

fn random_record(status: PeriodontalStatus, rng: &mut ChaCha8Rng) -> DiagnosisRecord {
    match status {
        PeriodontalStatus::Periodontitis => {
            let legacy = rng.gen_bool(0.1);
            let stage = (!legacy).then(|| *Stage::ALL.choose(rng).unwrap());
            let grade = (!legacy).then(|| *Grade::ALL.choose(rng).unwrap());
            let extent = rng.gen_bool(0.9).then(|| *Extent::ALL.choose(rng).unwrap());
            DiagnosisRecord::periodontitis(stage, grade, extent)
        }
        PeriodontalStatus::Gingivitis => DiagnosisRecord::gingivitis(
            rng.gen_bool(0.85)
                .then(|| *Extent::ALL.choose(rng).unwrap()),
            rng.gen_bool(0.8)
                .then(|| *Subtype::ALL.choose(rng).unwrap()),
        ),
        PeriodontalStatus::Health => DiagnosisRecord::health(
            rng.gen_bool(0.85)
                .then(|| *Subtype::ALL.choose(rng).unwrap()),
        ),
    }
}

struct Rendered {
    text: String,
    spans: Vec<EntitySpan>,
    record: DiagnosisRecord,
}

fn render(record: &DiagnosisRecord, spec: &PerturbationSpec, rng: &mut ChaCha8Rng) -> Rendered {
    let informal = rng.gen_bool(spec.informal_format_rate);
    let mut clause = match (record.status, record.stage, record.grade) {
        (PeriodontalStatus::Periodontitis, Some(s), Some(g)) if informal => {
            informal_clause(record.extent, s, g, rng)
        }
        _ => canonical_clause(record, rng),
    };
    if rng.gen_bool(spec.typo_rate) {
        inject_typo(&mut clause, rng);
    }
    if rng.gen_bool(spec.distractor_extent_rate) {
        let e = *Extent::ALL.choose(rng).unwrap();
        let noun = *DISTRACTOR_NOUNS.choose(rng).unwrap();
        clause.push(txt(&format!(" with {} {noun}", e.name())));
    }
    let mut gold = *record;
    if rng.gen_bool(spec.multi_diagnosis_rate) {
        let status = *PeriodontalStatus::ALL.choose(rng).unwrap();
        let second = random_record(status, rng);
        clause.push(txt(" and "));
        clause.extend(canonical_clause(&second, rng));
        gold = adjudicate(&[*record, second]).expect("two candidates");
    }
    let anchor = if rng.gen_bool(spec.anchor_variation_rate) {
        *ANCHORS.choose(rng).unwrap()
    } else {
        "D: "
    };

    let mut b = Builder::default();
    let pick = |bank: &[&'static str], rng: &mut ChaCha8Rng, n: usize| -> Vec<&'static str> {
        bank.choose_multiple(rng, n).copied().collect()
    };
    let mut header = pick(OPENERS, rng, 1);
    let n_hist = rng.gen_range(0..=1);
    header.extend(pick(HISTORY, rng, n_hist));
    let n_find = rng.gen_range(1..=3);
    header.extend(pick(FINDINGS, rng, n_find));
    b.push(&header.join(" "));
    b.push("\n");
    b.push(anchor);
    for piece in &clause {
        match piece {
            Piece::Text(s) | Piece::Keyword(s) => b.push(s),
            Piece::Entity(v, s) => b.entity(*v, s),
        }
    }
    b.push(".\n");
    let n_plan = rng.gen_range(1..=2);
    b.push(&pick(PLANS, rng, n_plan).join(" "));
    b.push("\n");
    Rendered {
        text: b.text,
        spans: b.spans,
        record: gold,
    }
}

fn template_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generates `variants_per_template` labeled notes per template.
///
/// Output order is (template, variant); each template draws from its own
/// RNG derived from `perturb.rng_seed`, so the result is a pure function of
/// the inputs.
pub fn generate_offline(
    templates: &[SeedTemplate],
    variants_per_template: usize,
    perturb: &PerturbationSpec,
) -> Vec<AnnotatedNote> {
    let mut out = Vec::with_capacity(templates.len() * variants_per_template);
    for (ti, t) in templates.iter().enumerate() {
        let mut rng = template_rng(perturb.rng_seed, ti);
        for v in 0..variants_per_template {
            let r = render(&t.embedded_record, perturb, &mut rng);
            let mut note = AnnotatedNote::new(
                Note {
                    note_id: format!("{}-v{v:02}", t.note.note_id),
                    site_id: t.note.site_id.clone(),
                    text: r.text,
                    provenance: Provenance::OfflineGenerated,
                },
                AnnotationSource::Embedded,
            );
            note.spans = r.spans;
            note.record = Some(r.record);
            out.push(note);
        }
    }
    out
}

/// A stand-in for a site's note archive: `per_status` clean gold notes for
/// each status, with randomly drawn legal diagnoses.
pub fn demo_seed_corpus(per_status: usize, site_id: &str, seed: u64) -> Vec<AnnotatedNote> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = PerturbationSpec::clean(seed);
    let mut out = Vec::new();
    for status in [
        PeriodontalStatus::Periodontitis,
        PeriodontalStatus::Gingivitis,
        PeriodontalStatus::Health,
    ] {
        for k in 0..per_status {
            let record = random_record(status, &mut rng);
            let r = render(&record, &clean, &mut rng);
            let mut note = AnnotatedNote::new(
                Note {
                    note_id: format!("{site_id}-{}-{k:03}", status.name().to_lowercase()),
                    site_id: site_id.to_string(),
                    text: r.text,
                    provenance: Provenance::Real,
                },
                AnnotationSource::Gold,
            );
            note.spans = r.spans;
            note.record = Some(r.record);
            out.push(note);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_spans;

    fn templates() -> Vec<SeedTemplate> {
        demo_seed_corpus(4, "site1", 3)
            .into_iter()
            .map(|n| SeedTemplate::from_gold(&n).unwrap())
            .collect()
    }

    #[test]
    fn deterministic_per_seed() {
        let t = templates();
        let spec = PerturbationSpec::uniform(0.3, 11);
        let a = generate_offline(&t, 3, &spec);
        let b = generate_offline(&t, 3, &spec);
        assert_eq!(a, b);
        let c = generate_offline(&t, 3, &PerturbationSpec::uniform(0.3, 12));
        assert_ne!(a, c);
    }

    #[test]
    fn spans_are_valid_and_records_legal() {
        for rate in [0.0, 0.5, 1.0] {
            for n in generate_offline(&templates(), 5, &PerturbationSpec::uniform(rate, 5)) {
                check_spans(n.text(), &n.spans).unwrap();
                assert!(n.record.unwrap().is_valid());
            }
        }
    }

    #[test]
    fn clean_mode_uses_canonical_sentence() {
        for n in generate_offline(&templates(), 3, &PerturbationSpec::clean(1)) {
            let line = n.text().lines().find(|l| l.starts_with("D: ")).unwrap();
            let r = n.record.unwrap();
            assert_eq!(n.record, Some(r));
            if r.status == PeriodontalStatus::Periodontitis {
                let mut expected = String::from("D: ");
                if let Some(e) = r.extent {
                    expected.push_str(&format!("{} ", e.name()));
                }
                expected.push_str("Periodontitis");
                if let Some(s) = r.stage {
                    expected.push_str(&format!(" Stage {}", s.roman()));
                }
                if let Some(g) = r.grade {
                    expected.push_str(&format!(" Grade {}", g.letter()));
                }
                expected.push('.');
                assert_eq!(line, expected);
            }
        }
    }

    #[test]
    fn typo_is_one_edit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for word in ["Periodontitis", "Generalized", "Health", "Stage"] {
            for _ in 0..200 {
                let t = typo(word, &mut rng);
                assert_eq!(
                    strsim::levenshtein(&t.to_lowercase(), &word.to_lowercase()),
                    1,
                    "{t}"
                );
            }
        }
    }

    #[test]
    fn rate_validation() {
        assert!(PerturbationSpec::uniform(0.15, 0).validate().is_ok());
        assert!(PerturbationSpec::uniform(1.5, 0).validate().is_err());
    }

    fn diagnosis_line(n: &AnnotatedNote) -> &str {
        n.text().lines().nth(1).unwrap()
    }

    #[test]
    fn typo_rate_one_always_injects() {
        let spec = PerturbationSpec {
            typo_rate: 1.0,
            ..PerturbationSpec::clean(8)
        };
        let clean = generate_offline(&templates(), 4, &PerturbationSpec::clean(8));
        let typo = generate_offline(&templates(), 4, &spec);
        for (c, t) in clean.iter().zip(&typo) {
            let words = |n: &AnnotatedNote| -> Vec<String> {
                diagnosis_line(n)
                    .split_whitespace()
                    .map(str::to_lowercase)
                    .collect()
            };
            let (cw, tw) = (words(c), words(t));
            let changed = tw
                .iter()
                .filter(|w| !cw.contains(w))
                .filter(|w| cw.iter().any(|c| strsim::levenshtein(c, w) == 1))
                .count();
            assert!(changed >= 1, "{}", diagnosis_line(t));
        }
    }

    #[test]
    fn distractor_rate_one_on_periodontitis() {
        let spec = PerturbationSpec {
            distractor_extent_rate: 1.0,
            ..PerturbationSpec::clean(8)
        };
        let perio: Vec<_> = templates()
            .into_iter()
            .filter(|t| t.status_category == PeriodontalStatus::Periodontitis)
            .collect();
        for n in generate_offline(&perio, 4, &spec) {
            let line = diagnosis_line(&n);
            assert!(
                DISTRACTOR_NOUNS
                    .iter()
                    .any(|d| line.contains(&format!("Localized {d}"))
                        || line.contains(&format!("Generalized {d}"))),
                "{line}"
            );
        }
    }

    #[test]
    fn multi_diagnosis_yields_two_candidates() {
        let spec = PerturbationSpec {
            multi_diagnosis_rate: 1.0,
            ..PerturbationSpec::clean(8)
        };
        for n in generate_offline(&templates(), 4, &spec) {
            let c = crate::normalization::infer_candidates(n.text(), &n.spans);
            assert_eq!(c.len(), 2, "{}", diagnosis_line(&n));
        }
    }
}
