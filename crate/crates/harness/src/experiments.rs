//! One Monte Carlo trial of each experiment.

use std::collections::BTreeMap;
use std::sync::Arc;

use matchlab_core::fields::{
    default_grid_size, density_field, dirichlet_energy, dm_upper_bound, heat_smooth, poisson_solve,
    residual_coefficients, sup_residual, SpectralCoefficients,
};
use matchlab_core::hjb::dual_lower_bound;
use matchlab_core::transport::{
    w2_bipartite, w2_interval_to_uniform, w2_to_uniform_quantized, wp_circle_empirical, wp_interval_empirical,
    DisplacementField, EmpiricalSample, TransportPlanResult,
};
use matchlab_core::{DomainGeometry, DomainKind, Error, SpectralBasis};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::rng::{sampler, trial_rng};

/// Largest evaluation grid a retry after `GridTooCoarse` may ask for.
const MAX_GRID: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    /// The event precondition failed; kept out of the conditional mean.
    Excluded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial_index: usize,
    pub value: f64,
    pub status: TrialStatus,
    pub auxiliaries: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    fn new(n: usize, trial_index: usize, value: f64) -> Self {
        TrialRecord { n, trial_index, value, status: TrialStatus::Ok, auxiliaries: BTreeMap::new(), error: None }
    }

    fn aux(mut self, key: &str, v: f64) -> Self {
        self.auxiliaries.insert(key.to_string(), v);
        self
    }

    fn excluded(mut self) -> Self {
        self.status = TrialStatus::Excluded;
        self
    }

    pub(crate) fn failed(n: usize, trial_index: usize, err: &Error) -> Self {
        TrialRecord {
            n,
            trial_index,
            value: f64::NAN,
            status: TrialStatus::Failed,
            auxiliaries: BTreeMap::new(),
            error: Some(err.to_string()),
        }
    }
}

/// Everything a trial at size `n` shares with its siblings.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub n: usize,
    pub t: Option<f64>,
    pub basis: Option<Arc<SpectralBasis>>,
    pub grid_size: usize,
    /// Grid nodes per axis for quantized matching.
    pub quantization: Option<usize>,
}

impl TrialSetup {
    pub fn new(cfg: &ExperimentConfig, n: usize) -> Result<Self, Error> {
        let domain = cfg.geometry();
        let (t, basis) = if cfg.experiment.needs_time() {
            let t = cfg.t_rule.time(n);
            let basis = if cfg.cutoff > 0 {
                SpectralBasis::new(domain, cfg.cutoff)?
            } else {
                SpectralBasis::for_time(domain, t)?
            };
            (Some(t), Some(Arc::new(basis)))
        } else {
            (None, None)
        };
        // the dual bound's sigma, and so its slack, shrinks with the grid step
        let floor = if cfg.experiment == ExperimentKind::DualBound { 128 } else { 64 };
        let grid_size = match (cfg.grid_size, &basis) {
            (g, _) if g > 0 => g,
            (_, Some(b)) => default_grid_size(b.cutoff()).max(floor),
            _ => 0,
        };
        let quantization = match cfg.experiment {
            ExperimentKind::MatchToUniform | ExperimentKind::BipartiteIdentity => cfg.quantization(n),
            _ => None,
        };
        Ok(TrialSetup { n, t, basis, grid_size, quantization })
    }
}

/// A finished trial and, for the bipartite identity, the displacement
/// fields of both samples against the uniform grid.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub record: TrialRecord,
    pub displacements: Vec<DisplacementField>,
}

impl From<TrialRecord> for TrialResult {
    fn from(record: TrialRecord) -> Self {
        TrialResult { record, displacements: vec![] }
    }
}

/// Runs `f` on the grid `g`, growing the grid when the certificate asks for it.
fn with_grid<T>(g: usize, f: impl Fn(usize) -> Result<T, Error>) -> Result<(T, usize), Error> {
    let mut g = g;
    loop {
        match f(g) {
            Err(Error::GridTooCoarse { required, .. }) if required > g && g < MAX_GRID => {
                g = required.min(MAX_GRID);
            }
            other => return other.map(|v| (v, g)),
        }
    }
}

pub fn bipartite(a: &EmpiricalSample, b: &EmpiricalSample, p: u32) -> Result<TransportPlanResult, Error> {
    match a.domain.kind {
        DomainKind::Interval => wp_interval_empirical(&a.xs(), &b.xs(), p),
        DomainKind::Circle => wp_circle_empirical(&a.xs(), &b.xs(), p),
        _ => w2_bipartite(a, b, p),
    }
}

fn to_uniform(a: &EmpiricalSample, k: Option<usize>) -> Result<TransportPlanResult, Error> {
    match (a.domain.kind, k) {
        (DomainKind::Interval, _) => w2_interval_to_uniform(&a.xs()),
        (_, Some(k)) => w2_to_uniform_quantized(a, k),
        (_, None) => Err(Error::Quantization(format!("no square grid for n = {}", a.n()))),
    }
}

fn smoothed(a: &EmpiricalSample, setup: &TrialSetup) -> Result<SpectralCoefficients, Error> {
    let basis = setup.basis.as_ref().expect("smoothing experiments carry a basis");
    heat_smooth(&residual_coefficients(a, basis)?, setup.t.expect("smoothing experiments carry t"))
}

/// Runs trial `trial` of size `setup.n`. Event failures come back as
/// excluded records; other errors are returned to the caller.
pub fn run_trial(cfg: &ExperimentConfig, setup: &TrialSetup, trial: usize) -> Result<TrialResult, Error> {
    let n = setup.n;
    let domain: DomainGeometry = cfg.geometry();
    let mut rng = trial_rng(cfg.seed, cfg.experiment.id(), n, trial);
    let a = sampler(domain, n, &mut rng);
    let rec = |v: f64| TrialRecord::new(n, trial, v);
    Ok(match cfg.experiment {
        ExperimentKind::MatchBipartite => {
            let b = sampler(domain, n, &mut rng);
            rec(bipartite(&a, &b, 2)?.cost).into()
        }
        ExperimentKind::W1Scaling => {
            let b = sampler(domain, n, &mut rng);
            let w1 = bipartite(&a, &b, 1)?.cost;
            let w2 = bipartite(&a, &b, 2)?.cost;
            rec(w1).aux("w2_sq", w2).into()
        }
        ExperimentKind::MatchToUniform => {
            let plan = to_uniform(&a, setup.quantization)?;
            let (lo, hi) = plan.interval();
            rec(plan.cost).aux("slack", plan.slack).aux("lower", lo).aux("upper", hi).into()
        }
        ExperimentKind::EnergyIdentity => {
            let f = poisson_solve(&smoothed(&a, setup)?)?;
            rec(dirichlet_energy(&f)).into()
        }
        ExperimentKind::SupResidual => {
            let r = smoothed(&a, setup)?;
            let (sup, g) = with_grid(setup.grid_size, |g| sup_residual(&r, n, g))?;
            let up = sup.certified_upper();
            rec(up)
                .aux("grid_sup", sup.sup)
                .aux("slack", sup.slack)
                .aux("grid_size", g as f64)
                .aux("event_violated", f64::from(u8::from(up > cfg.eta)))
                .into()
        }
        ExperimentKind::DmBound => {
            let r = smoothed(&a, setup)?;
            let u0 = density_field(&r, n, setup.grid_size)?;
            let f = poisson_solve(&r)?.scaled(-1.0 / (n as f64).sqrt());
            match dm_upper_bound(&u0, &f) {
                Ok(b) => rec(b.value).aux("clamp", b.clamp).aux("density_min", u0.min()).into(),
                Err(Error::NonpositiveDensity { min }) => rec(f64::NAN).aux("density_min", min).excluded().into(),
                Err(e) => return Err(e),
            }
        }
        ExperimentKind::DualBound => {
            let r = smoothed(&a, setup)?;
            let f = poisson_solve(&r)?;
            match with_grid(setup.grid_size, |g| dual_lower_bound(&f, &r, n, cfg.eta, g, cfg.sigma_floor)) {
                Ok((b, g)) => rec(b.value)
                    .aux("certified", b.certified())
                    .aux("slack", b.slack)
                    .aux("sigma", b.sigma)
                    .aux("sup_residual", b.sup_residual)
                    .aux("pair_violation", b.pair_violation)
                    .aux("grid_size", g as f64)
                    .into(),
                Err(Error::EventViolated { sup, .. }) => rec(f64::NAN).aux("sup_residual", sup).excluded().into(),
                Err(e) => return Err(e),
            }
        }
        ExperimentKind::BipartiteIdentity => {
            let b = sampler(domain, n, &mut rng);
            let k = setup
                .quantization
                .ok_or_else(|| Error::Quantization(format!("no square grid for n = {n}")))?;
            let bip = bipartite(&a, &b, 2)?.cost;
            let pa = w2_to_uniform_quantized(&a, k)?;
            let pb = w2_to_uniform_quantized(&b, k)?;
            let displacements = vec![DisplacementField::from_plan(&a, k, &pa)?, DisplacementField::from_plan(&b, k, &pb)?];
            let record = rec(bip)
                .aux("uniform", 0.5 * (pa.cost + pb.cost))
                .aux("uniform_slack", 0.5 * (pa.slack + pb.slack));
            TrialResult { record, displacements }
        }
    })
}
