//! Prompt assembly for LLM-backed note generation.
//!
//! A prompt has three configurable sections (rewriting rules, required note
//! components, labeling instructions) followed by the verbatim template. The
//! labeling section asks the model to close its answer with one trailer line
//! `LABELS: {json}` carrying the diagnosis, so generated notes arrive labeled.

use std::path::Path;

use serde_json::{Map, Value};

use super::SeedTemplate;
use crate::model::{DiagnosisRecord, Dimension};

pub const TRAILER_PREFIX: &str = "LABELS:";

pub const SYSTEM_MESSAGE: &str =
    "You are an experienced periodontist writing progress notes in an electronic dental record.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub rules: String,
    pub components: String,
    pub labeling: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            rules: "\
- Write a new periodontal progress note modeled on the template note below.
- Vary wording, sentence order and clinical details; do not copy sentences verbatim.
- Use the abbreviations and terse style of real chairside documentation.
- Do not include names, dates of birth, addresses or any other identifiers."
                .into(),
            components: "\
- Reason for visit and relevant medical history.
- Periodontal examination findings (probing depths, bleeding on probing, mobility).
- Radiographic findings.
- The periodontal diagnosis.
- Treatment rendered and the plan for the next visit."
                .into(),
            labeling: "\
- Keep the diagnosis of the template exactly as it is.
- State the diagnosis once, in a sentence that begins with \"D:\".
- Do not add diagnostic details the template does not state; use null for blank values.
- End the answer with one final line holding the diagnosis as JSON, in the form shown below."
                .into(),
        }
    }
}

impl PromptConfig {
    /// Parses a plain-text prompt file with `[rules]`, `[components]` and
    /// `[labeling]` section headers. Missing sections keep their defaults.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = PromptConfig::default();
        let mut current: Option<(String, Vec<&str>)> = None;
        let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                if let Some(s) = current.take() {
                    sections.push(s);
                }
                current = Some((
                    trimmed[1..trimmed.len() - 1].trim().to_ascii_lowercase(),
                    Vec::new(),
                ));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !trimmed.is_empty() {
                return Err(format!("text outside of a section: {trimmed:?}"));
            }
        }
        sections.extend(current);
        for (name, lines) in sections {
            let body = lines.join("\n").trim().to_string();
            match name.as_str() {
                "rules" => cfg.rules = body,
                "components" => cfg.components = body,
                "labeling" => cfg.labeling = body,
                other => return Err(format!("unknown prompt section [{other}]")),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn trailer_key(d: Dimension) -> &'static str {
    match d {
        Dimension::Status => "status",
        Dimension::Stage => "stage",
        Dimension::Grade => "grade",
        Dimension::Extent => "extent",
        Dimension::Subtype => "subtype",
    }
}

/// Trailer JSON for `record`, restricted to the dimensions its status permits.
pub fn trailer_json(record: &DiagnosisRecord) -> String {
    let mut map = Map::new();
    for &d in DiagnosisRecord::permitted_dimensions(record.status) {
        let v = record
            .get(d)
            .map_or(Value::Null, |v| Value::String(v.canonical().into()));
        map.insert(trailer_key(d).into(), v);
    }
    Value::Object(map).to_string()
}

/// Dimensions the model is asked to preserve beyond the status itself.
fn detail_dimensions(record: &DiagnosisRecord) -> Vec<&'static str> {
    DiagnosisRecord::permitted_dimensions(record.status)
        .iter()
        .filter(|&&d| d != Dimension::Status)
        .map(|d| d.name())
        .collect()
}

pub fn build_prompt(template: &SeedTemplate, config: &PromptConfig) -> String {
    let r = &template.embedded_record;
    format!(
        "## Rules\n{rules}\n\n## Note components\n{components}\n\n## Labeling instructions\n{labeling}\n\
         Periodontal status of the template: {status}\n\
         Entity details to label: {details}\n\
         Final line format:\n{prefix} {trailer}\n\n## Template note\n{text}\n",
        rules = config.rules.trim_end(),
        components = config.components.trim_end(),
        labeling = config.labeling.trim_end(),
        status = r.status.name(),
        details = detail_dimensions(r).join(", "),
        prefix = TRAILER_PREFIX,
        trailer = trailer_json(r),
        text = template.note.text,
    )
}

/// Returns the named section body of a built prompt (for inspection and tests).
pub fn prompt_section<'a>(prompt: &'a str, heading: &str) -> Option<&'a str> {
    let marker = format!("## {heading}\n");
    let start = prompt.find(&marker)? + marker.len();
    let rest = &prompt[start..];
    let end = rest.find("\n## ").unwrap_or(rest.len());
    Some(&rest[..end])
}
