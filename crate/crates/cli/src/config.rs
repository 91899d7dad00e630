//! TOML configuration for `perio synth`.
//!
//! ```toml
//! [generation]
//! endpoint_url = "http://localhost:8000/v1"
//! model_name = "gpt-4"
//! variants_per_template = 10
//!
//! [perturbation]
//! typo_rate = 0.15
//!
//! [prompt]
//! file = "prompt.txt"   # or inline rules / components / labeling
//! ```

use std::path::{Path, PathBuf};

use perio_core::synthesis::{GenerationConfig, PerturbationSpec, PromptConfig};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub generation: GenerationConfig,
    pub perturbation: PerturbationSpec,
    pub prompt: PromptSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub file: Option<PathBuf>,
    pub rules: Option<String>,
    pub components: Option<String>,
    pub labeling: Option<String>,
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Prompt sections: defaults, overridden by the prompt file, overridden
    /// by inline values. Relative file paths resolve against `base`.
    pub fn prompt_config(&self, base: Option<&Path>) -> Result<PromptConfig, String> {
        let mut cfg = match &self.prompt.file {
            Some(f) => {
                let path = match base {
                    Some(b) if f.is_relative() => b.join(f),
                    _ => f.clone(),
                };
                PromptConfig::load(path)?
            }
            None => PromptConfig::default(),
        };
        if let Some(r) = &self.prompt.rules {
            cfg.rules = r.clone();
        }
        if let Some(c) = &self.prompt.components {
            cfg.components = c.clone();
        }
        if let Some(l) = &self.prompt.labeling {
            cfg.labeling = l.clone();
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_with_defaults() {
        let c: SynthConfig = toml::from_str(
            "[generation]\nendpoint_url = \"http://x/v1\"\nretry_limit = 1\n[perturbation]\ntypo_rate = 0.2\n[prompt]\nrules = \"Be brief.\"\n",
        )
        .unwrap();
        assert_eq!(c.generation.endpoint_url, "http://x/v1");
        assert_eq!(c.generation.variants_per_template, 10);
        assert_eq!(c.generation.temperature, 1.0);
        assert_eq!(c.perturbation.typo_rate, 0.2);
        assert_eq!(c.perturbation.multi_diagnosis_rate, 0.0);
        assert_eq!(c.prompt_config(None).unwrap().rules, "Be brief.");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<SynthConfig>("[generation]\ntemprature = 1.0\n").is_err());
        assert!(toml::from_str::<SynthConfig>("[other]\n").is_err());
    }
}
