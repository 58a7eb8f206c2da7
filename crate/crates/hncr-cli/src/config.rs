//! Run configuration: a flat TOML file plus command-line overrides.
//! The effective (merged) config is echoed into the output directory so
//! every run can be reproduced from its artifacts alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hncr_core::data::PositiveRule;
use hncr_core::model::{Ablation, Backend, HyperParams};
use hncr_core::neighbors::WeightMode;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMode {
    Semantic,
    Cooccurrence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Ratings file: `user<TAB>item<TAB>rating`, comma also accepted.
    pub dataset: String,
    /// Ratings at or above this count as positive; unset = all observed.
    pub positive_threshold: Option<f64>,
    /// Train/validation/test fractions.
    pub split: [f64; 3],
    /// Root seed; every random stream derives from it.
    pub seed: u64,
    pub out: String,

    pub backend: String,
    pub dim: usize,
    /// Unset = per-backend default (1 hyperbolic, 2 euclidean).
    pub layers: Option<usize>,
    pub curvature: f64,
    pub temperature: f64,
    pub radius: f64,
    pub decoder_t: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub ablate: Vec<String>,

    pub k_users: usize,
    pub k_items: usize,
    /// Latent dimensions of the relational-graph embeddings.
    pub latent_users: usize,
    pub latent_items: usize,
    pub weight_mode: String,
    pub neighbor_mode: String,
    pub line_epochs: usize,
    pub line_negatives: usize,
    pub line_lr: f64,

    /// Unrated items sampled per user for the top-K protocol.
    pub eval_negatives: usize,
    pub eval_ks: Vec<usize>,
    pub repeats: usize,
    /// Recommendations per user written by `rank`.
    pub top_n: usize,
    pub sparsity_bins: usize,
    pub hierarchy_groups: usize,
    pub scatter_sample: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HyperParams::defaults(Backend::Hyperbolic);
        RunConfig {
            dataset: String::new(),
            positive_threshold: None,
            split: [0.8, 0.1, 0.1],
            seed: h.seed,
            out: "run".into(),
            backend: "hyperbolic".into(),
            dim: h.dim,
            layers: None,
            curvature: h.curvature,
            temperature: h.temperature,
            radius: h.radius,
            decoder_t: h.decoder_t,
            lr: h.lr,
            batch: h.batch,
            epochs: h.epochs,
            patience: h.patience,
            ablate: Vec::new(),
            k_users: h.k_users,
            k_items: h.k_items,
            latent_users: 64,
            latent_items: 64,
            weight_mode: "paper".into(),
            neighbor_mode: "semantic".into(),
            line_epochs: 30,
            line_negatives: 5,
            line_lr: 0.025,
            eval_negatives: 1000,
            eval_ks: vec![2, 5, 10, 20, 50, 100],
            repeats: 1,
            top_n: 20,
            sparsity_bins: 4,
            hierarchy_groups: 4,
            scatter_sample: 500,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub weight_mode: Option<String>,
    pub neighbor_mode: Option<String>,
    pub ablate: Vec<String>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Input(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Input(format!("bad config {}: {e}", p.display()))
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = over.seed {
            cfg.seed = s;
        }
        if let Some(b) = &over.backend {
            cfg.backend = b.clone();
        }
        if let Some(w) = &over.weight_mode {
            cfg.weight_mode = w.clone();
        }
        if let Some(n) = &over.neighbor_mode {
            cfg.neighbor_mode = n.clone();
        }
        if !over.ablate.is_empty() {
            cfg.ablate = over.ablate.clone();
        }
        if let Some(r) = over.repeats {
            cfg.repeats = r;
        }
        if let Some(o) = &over.out {
            cfg.out = o.display().to_string();
        }
        cfg.hyper()?; // reject bad values before any work starts
        cfg.weight()?;
        cfg.neighbor()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.out)
    }

    pub fn positive_rule(&self) -> PositiveRule {
        match self.positive_threshold {
            Some(t) => PositiveRule::MinRating(t),
            None => PositiveRule::AllObserved,
        }
    }

    pub fn backend_kind(&self) -> Result<Backend, CliError> {
        Backend::from_token(&self.backend)
            .ok_or_else(|| CliError::Input(format!("unknown backend \"{}\"", self.backend)))
    }

    pub fn weight(&self) -> Result<WeightMode, CliError> {
        WeightMode::from_token(&self.weight_mode)
            .ok_or_else(|| CliError::Input(format!("unknown weight_mode \"{}\"", self.weight_mode)))
    }

    pub fn neighbor(&self) -> Result<NeighborMode, CliError> {
        match self.neighbor_mode.as_str() {
            "semantic" => Ok(NeighborMode::Semantic),
            "cooccurrence" => Ok(NeighborMode::Cooccurrence),
            other => Err(CliError::Input(format!("unknown neighbor_mode \"{other}\""))),
        }
    }

    pub fn ablation(&self) -> Result<Ablation, CliError> {
        let mut a = Ablation::default();
        for name in &self.ablate {
            match name.as_str() {
                "no_semantic" => a.no_semantic = true,
                "no_history" => a.no_history = true,
                "uniform_attention" => a.uniform_attention = true,
                other => {
                    return Err(CliError::Input(format!("unknown ablation \"{other}\"")));
                }
            }
        }
        Ok(a)
    }

    pub fn hyper(&self) -> Result<HyperParams, CliError> {
        let backend = self.backend_kind()?;
        let mut h = HyperParams::defaults(backend);
        h.dim = self.dim;
        if let Some(l) = self.layers {
            h.layers = l;
        }
        h.temperature = self.temperature;
        h.curvature = self.curvature;
        h.radius = self.radius;
        h.decoder_t = self.decoder_t;
        h.k_users = self.k_users;
        h.k_items = self.k_items;
        h.lr = self.lr;
        h.batch = self.batch;
        h.epochs = self.epochs;
        h.patience = self.patience;
        h.seed = self.seed;
        h.ablation = self.ablation()?;
        h.validate()
            .map_err(|e| CliError::Input(format!("bad hyperparameters: {e}")))?;
        Ok(h)
    }

    /// HNCR / ENCR plus ablation and neighborhood-variant suffixes.
    pub fn variant_name(&self) -> Result<String, CliError> {
        let mut name = match self.backend_kind()? {
            Backend::Hyperbolic => "HNCR".to_string(),
            Backend::Euclidean => "ENCR".to_string(),
        };
        let a = self.ablation()?;
        if a.no_semantic {
            name.push_str("-S");
        }
        if a.no_history {
            name.push_str("-H");
        }
        if a.uniform_attention {
            name.push_str("-A");
        }
        if self.neighbor()? == NeighborMode::Cooccurrence {
            name.push_str("-C");
        }
        match self.weight()? {
            WeightMode::CommonCount => name.push_str("-N"),
            WeightMode::Unweighted => name.push_str("-0"),
            WeightMode::HeatPopularity => {}
        }
        Ok(name)
    }

    /// Writes the merged config next to the run's other artifacts.
    pub fn echo(&self, out: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Input(format!("cannot serialize config: {e}")))?;
        std::fs::write(out.join("effective-config.toml"), text).map_err(|e| {
            CliError::Input(format!("cannot write effective config: {e}"))
        })
    }
}
