//! Experiment configuration, read from and written to JSON.

use std::path::Path;

use matchlab_core::{DomainGeometry, DomainKind};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MatchBipartite,
    MatchToUniform,
    EnergyIdentity,
    DmBound,
    DualBound,
    SupResidual,
    W1Scaling,
    BipartiteIdentity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::MatchBipartite,
        ExperimentKind::MatchToUniform,
        ExperimentKind::EnergyIdentity,
        ExperimentKind::DmBound,
        ExperimentKind::DualBound,
        ExperimentKind::SupResidual,
        ExperimentKind::W1Scaling,
        ExperimentKind::BipartiteIdentity,
    ];

    /// Stable identifier mixed into the random stream key.
    pub fn id(self) -> u64 {
        match self {
            ExperimentKind::MatchBipartite => 1,
            ExperimentKind::MatchToUniform => 2,
            ExperimentKind::EnergyIdentity => 3,
            ExperimentKind::DmBound => 4,
            ExperimentKind::DualBound => 5,
            ExperimentKind::SupResidual => 6,
            ExperimentKind::W1Scaling => 7,
            ExperimentKind::BipartiteIdentity => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MatchBipartite => "match_bipartite",
            ExperimentKind::MatchToUniform => "match_to_uniform",
            ExperimentKind::EnergyIdentity => "energy_identity",
            ExperimentKind::DmBound => "dm_bound",
            ExperimentKind::DualBound => "dual_bound",
            ExperimentKind::SupResidual => "sup_residual",
            ExperimentKind::W1Scaling => "w1_scaling",
            ExperimentKind::BipartiteIdentity => "bipartite_identity",
        }
    }

    /// Whether the experiment smooths the empirical measure and so needs `t`.
    pub fn needs_time(self) -> bool {
        matches!(
            self,
            ExperimentKind::EnergyIdentity
                | ExperimentKind::DmBound
                | ExperimentKind::DualBound
                | ExperimentKind::SupResidual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeForm {
    /// `t = gamma log(n) / n`
    GammaLognOverN,
    /// `t = gamma n^{-2q}`
    NPower { q: f64 },
    /// `t = gamma` for every `n`
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRule {
    pub gamma: f64,
    pub form: TimeForm,
}

impl Default for TimeRule {
    fn default() -> Self {
        TimeRule { gamma: 1.0, form: TimeForm::GammaLognOverN }
    }
}

impl TimeRule {
    pub fn time(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.form {
            TimeForm::GammaLognOverN => self.gamma * nf.ln() / nf,
            TimeForm::NPower { q } => self.gamma * nf.powf(-2.0 * q),
            TimeForm::Fixed => self.gamma,
        }
    }
}

fn default_factor() -> usize {
    4
}

fn default_sigma_floor() -> f64 {
    1e-4
}

fn default_eta() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub t_rule: TimeRule,
    /// Spectral cutoff; 0 picks the smallest one meeting the truncation tolerance.
    #[serde(default)]
    pub cutoff: usize,
    /// Evaluation grid per axis; 0 picks a default per experiment.
    #[serde(default)]
    pub grid_size: usize,
    /// Grid nodes per sample point in quantized matching.
    #[serde(default = "default_factor")]
    pub quantization_factor: usize,
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
    /// Level of the event `sup |u^{n,t} - 1| <= eta`.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn new(domain: DomainKind, experiment: ExperimentKind, n_values: Vec<usize>, trials: usize) -> Self {
        ExperimentConfig {
            domain,
            experiment,
            n_values,
            trials,
            t_rule: TimeRule::default(),
            cutoff: 0,
            grid_size: 0,
            quantization_factor: default_factor(),
            sigma_floor: default_sigma_floor(),
            eta: default_eta(),
            seed: 0,
            output_path: String::new(),
        }
    }

    pub fn geometry(&self) -> DomainGeometry {
        self.domain.into()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_values.is_empty() {
            return bad("n_values must not be empty".into());
        }
        if self.n_values.contains(&0) {
            return bad("n_values must be positive".into());
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_values must be strictly increasing, got {:?}", self.n_values));
        }
        if !(self.t_rule.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.t_rule.gamma));
        }
        if let TimeForm::NPower { q } = self.t_rule.form {
            if !(q > 0.0) {
                return bad(format!("q must be positive, got {q}"));
            }
        }
        if self.quantization_factor == 0 {
            return bad("quantization_factor must be at least 1".into());
        }
        if !(self.sigma_floor > 0.0) || !(self.eta > 0.0) {
            return bad("sigma_floor and eta must be positive".into());
        }
        let d = self.geometry().dimension();
        for &n in &self.n_values {
            if self.experiment.needs_time() && !(self.t_rule.time(n) > 0.0) {
                return bad(format!("t(n) = {} is not positive at n = {n}", self.t_rule.time(n)));
            }
            let needs_grid = match self.experiment {
                ExperimentKind::BipartiteIdentity => true,
                ExperimentKind::MatchToUniform => self.domain != DomainKind::Interval,
                _ => false,
            };
            if needs_grid && quantization_side(d, self.quantization_factor * n).is_none() {
                return bad(format!(
                    "{} * {n} grid nodes do not form a square grid",
                    self.quantization_factor
                ));
            }
        }
        if self.experiment == ExperimentKind::DualBound && !self.geometry().is_periodic() {
            return bad("dual_bound runs on periodic domains only (use circle or torus2)".into());
        }
        Ok(())
    }

    /// Grid nodes per axis for quantized matching at sample size `n`.
    pub fn quantization(&self, n: usize) -> Option<usize> {
        quantization_side(self.geometry().dimension(), self.quantization_factor * n)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn quantization_side(dimension: usize, nodes: usize) -> Option<usize> {
    match dimension {
        1 => Some(nodes),
        _ => {
            let k = (nodes as f64).sqrt().round() as usize;
            (k * k == nodes).then_some(k)
        }
    }
}
