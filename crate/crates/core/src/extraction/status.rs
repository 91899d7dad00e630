use std::sync::OnceLock;

use regex::Regex;

use crate::model::PeriodontalStatus;

fn keyword_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(periodontitis|gingivitis|healthy|health)\b").unwrap())
}

fn context_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(periodont|gingiv|\bgums?\b|\bdiagnosis\b|\bdx\b|\bd\s*[:\-])").unwrap()
    })
}

fn qualifier_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(\bnon[\s\-]*|\b(stable|past|treated)[\s/]*|\bhistory\s+of\s+)$").unwrap()
    })
}

/// Keyword search used to bucket notes by status before template selection.
///
/// Returns the most severe status whose keyword appears. "health"/"healthy"
/// only counts on a line that also mentions periodontal context, and
/// "periodontitis" preceded by "non-", "stable", "past" or "history of"
/// is ignored.
pub fn detect_status_rulebased(text: &str) -> Option<PeriodontalStatus> {
    let mut best: Option<PeriodontalStatus> = None;
    for line in text.lines() {
        for m in keyword_re().find_iter(line) {
            let word = m.as_str().to_ascii_lowercase();
            let status = match word.as_str() {
                "periodontitis" => {
                    if qualifier_re().is_match(&line[..m.start()]) {
                        continue;
                    }
                    PeriodontalStatus::Periodontitis
                }
                "gingivitis" => PeriodontalStatus::Gingivitis,
                _ => {
                    if !context_re().is_match(line) {
                        continue;
                    }
                    PeriodontalStatus::Health
                }
            };
            best = Some(best.map_or(status, |b| b.max(status)));
        }
    }
    best
}
