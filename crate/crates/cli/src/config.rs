use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use scanpath_ais::experiment::CompareConfig;
use scanpath_ais::gaze::PipelineParams;
use scanpath_ais::stats::Tail;
use scanpath_ais::EmbeddingConfig;

/// Run configuration file. Every key is optional; command-line flags win
/// over the file, the file wins over built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub k_max: Option<usize>,
    pub alpha: Option<f64>,
    pub n_perm_selection: Option<usize>,
    pub n_perm_comparison: Option<usize>,
    pub seed: Option<u64>,
    pub min_rows: Option<usize>,
    pub min_trials: Option<usize>,
    pub tail: Option<String>,
    pub condition_a: Option<String>,
    pub condition_b: Option<String>,
    pub collapse_repeats: Option<bool>,
    pub min_confidence: Option<f64>,
    pub dispersion_threshold: Option<f64>,
    pub min_duration_ms: Option<f64>,
    pub max_duration_ms: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k_max: Option<usize>,
    pub alpha: Option<f64>,
    pub n_perm: Option<usize>,
    pub collapse_repeats: bool,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub embedding: EmbeddingConfig,
    pub compare: CompareConfig,
    pub pipeline: PipelineParams,
}

impl Settings {
    pub fn resolve(file: &FileConfig, cli: &Overrides) -> Result<Self> {
        let base = EmbeddingConfig::default();
        let embedding = EmbeddingConfig {
            k_max: cli.k_max.or(file.k_max).unwrap_or(base.k_max),
            alpha: cli.alpha.or(file.alpha).unwrap_or(base.alpha),
            n_perm: cli.n_perm.or(file.n_perm_selection).unwrap_or(base.n_perm),
            seed: cli.seed.or(file.seed).unwrap_or(base.seed),
            min_rows: file.min_rows.unwrap_or(base.min_rows),
        };
        embedding.validate()?;

        let cmp = CompareConfig::default();
        let tail = match &file.tail {
            Some(t) => t.parse::<Tail>()?,
            None => cmp.tail,
        };
        let conditions = match (&file.condition_a, &file.condition_b) {
            (Some(a), Some(b)) => Some((a.clone(), b.clone())),
            (None, None) => None,
            _ => anyhow::bail!("condition_a and condition_b must be given together"),
        };
        let compare = CompareConfig {
            n_perm: file.n_perm_comparison.unwrap_or(cmp.n_perm),
            tail,
            conditions,
            min_trials: file.min_trials.unwrap_or(cmp.min_trials),
        };

        let p = PipelineParams::default();
        let pipeline = PipelineParams {
            min_confidence: file.min_confidence.unwrap_or(p.min_confidence),
            dispersion_threshold: file.dispersion_threshold.unwrap_or(p.dispersion_threshold),
            min_duration_ms: file.min_duration_ms.unwrap_or(p.min_duration_ms),
            max_duration_ms: file.max_duration_ms.unwrap_or(p.max_duration_ms),
            collapse_repeats: cli.collapse_repeats || file.collapse_repeats.unwrap_or(p.collapse_repeats),
        };
        Ok(Self {
            embedding,
            compare,
            pipeline,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("k_max = 3\nseed = 9\nn_perm_selection = 50\ntail = \"greater\"").unwrap();
        let s = Settings::resolve(
            &file,
            &Overrides {
                seed: Some(1),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(s.embedding.k_max, 3);
        assert_eq!(s.embedding.seed, 1);
        assert_eq!(s.embedding.n_perm, 50);
        assert_eq!(s.compare.tail, Tail::Greater);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("kmax = 3").is_err());
    }

    #[test]
    fn unreachable_alpha_rejected() {
        let file: FileConfig = toml::from_str("alpha = 0.001\nn_perm_selection = 100").unwrap();
        assert!(Settings::resolve(&file, &Overrides::default()).is_err());
    }
}
