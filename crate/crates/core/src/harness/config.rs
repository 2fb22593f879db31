//! Experiment configuration, read from JSON or TOML.

use crate::error::{Error, Result};
use crate::geometry::{NestedRegions, Shape};
use crate::model::{Bump, DiffusivityField, RateParams};
use crate::sim::{default_substeps, DriftMode, SdeConfig};
use crate::wavelet::{minimal_coarse_level, BasisSpec, WaveletFamily};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Estimate,
    Posterior,
    RateStudy,
    AssouadStudy,
    KlSweep,
}

/// Analytic truth fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthSpec {
    Constant { value: f64 },
    Bumps { base: f64, bumps: Vec<Bump> },
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::Constant { value: 1.0 }
    }
}

impl TruthSpec {
    pub fn field(&self) -> DiffusivityField {
        match self {
            TruthSpec::Constant { value } => DiffusivityField::constant(*value),
            TruthSpec::Bumps { base, bumps } => DiffusivityField::bumps(*base, bumps.clone()),
        }
    }

    /// Upper bound on the field.
    pub fn sup(&self) -> f64 {
        match self {
            TruthSpec::Constant { value } => *value,
            TruthSpec::Bumps { base, bumps } => base + bumps.iter().map(|b| b.amplitude.max(0.0)).sum::<f64>(),
        }
    }

    /// `self + eps * bump`.
    pub fn perturbed(&self, bump: &Bump, eps: f64) -> TruthSpec {
        let extra = Bump { amplitude: bump.amplitude * eps, ..bump.clone() };
        match self {
            TruthSpec::Constant { value } => TruthSpec::Bumps { base: *value, bumps: vec![extra] },
            TruthSpec::Bumps { base, bumps } => {
                let mut b = bumps.clone();
                b.push(extra);
                TruthSpec::Bumps { base: *base, bumps: b }
            }
        }
    }

    pub fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Smoothness and sampling exponent; the dimension comes from the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub a: f64,
    pub s: f64,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self { a: 0.6, s: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    #[default]
    Gradient,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    /// Fixed `D`; otherwise `D = N^{-a}`.
    pub d_interval: Option<f64>,
    pub substeps: Option<usize>,
    /// Cap on the Euler step.
    pub max_dt: Option<f64>,
    #[serde(default)]
    pub drift: DriftKind,
}

/// How the finest level `J` depends on `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LevelRule {
    Fixed { j: u32 },
    /// `J = max(J0, round(log2(scale N^{1/(2s+d)})))`.
    Rate { scale: f64 },
}

impl Default for LevelRule {
    fn default() -> Self {
        LevelRule::Rate { scale: 1.0 }
    }
}

impl LevelRule {
    pub fn level(&self, n: usize, j0: u32, s: f64, d: usize) -> u32 {
        match *self {
            LevelRule::Fixed { j } => j.max(j0),
            LevelRule::Rate { scale } => {
                let t = scale * (n as f64).powf(1.0 / (2.0 * s + d as f64));
                (t.log2().round().max(0.0) as u32).max(j0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    /// Daubechies order; defaults to `max(4, floor(s) - 1)`.
    pub wavelet_order: Option<usize>,
    /// Coarse level; defaults to the smallest feasible one.
    pub j0: Option<u32>,
    #[serde(default)]
    pub level: LevelRule,
    /// Truncation `M` of `f̂*`; defaults to twice the truth's upper bound.
    pub truncation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Wavelet,
    Matern,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub kind: PriorKind,
    /// Prior smoothness; defaults to `rate.s`.
    pub s: Option<f64>,
    /// Standard deviation at the reference level (wavelet) or pointwise (Matérn).
    /// Wavelet default: `2^{-J0 d/2}`.
    pub amplitude: Option<f64>,
    /// Wavelet default: `J0`.
    pub reference_level: Option<u32>,
    #[serde(default = "default_matern_nodes")]
    pub matern_nodes: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default = "default_f_min")]
    pub f_min: f64,
}

fn default_matern_nodes() -> usize {
    65
}
fn default_jitter() -> f64 {
    1e-8
}
fn default_f_min() -> f64 {
    crate::model::DEFAULT_F_MIN
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            kind: PriorKind::Wavelet,
            s: None,
            amplitude: None,
            reference_level: None,
            matern_nodes: default_matern_nodes(),
            jitter: default_jitter(),
            f_min: default_f_min(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSpec {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub beta: f64,
    pub adapt: bool,
    /// Evaluation nodes per axis; defaults to `2^{J+4} + 1` in one dimension
    /// and 65 otherwise.
    pub eval_nodes: Option<usize>,
    /// `M` in the contraction fraction `Π(‖f - f0‖ ≥ M ξ_N)`.
    pub contraction_m: f64,
    /// Independent chains per data set, pooled after burn-in.
    pub chains: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self { iters: 20_000, burn_in: 5_000, thin: 10, beta: 0.2, adapt: true, eval_nodes: None, contraction_m: 1.0, chains: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlSourceKind {
    #[default]
    Simulated,
    Proxy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlConfig {
    pub epsilons: Vec<f64>,
    /// Transitions per replicate in the ε sweep.
    pub eps_transitions: usize,
    pub eps_replicates: usize,
    /// Path lengths in the N sweep.
    pub n_grid: Vec<usize>,
    pub n_replicates: usize,
    /// ε used in the N sweep.
    pub n_epsilon: f64,
    pub d_interval: f64,
    pub substeps: Option<usize>,
    #[serde(default)]
    pub source: KlSourceKind,
    /// Perturbation direction; defaults to a unit bump of radius `0.2` at the
    /// centre of the domain's bounding box.
    pub bump: Option<Bump>,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            eps_transitions: 20_000,
            eps_replicates: 200,
            n_grid: vec![500, 1000, 2000, 4000],
            n_replicates: 400,
            n_epsilon: 0.2,
            d_interval: 0.01,
            substeps: None,
            source: KlSourceKind::Simulated,
            bump: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssouadConfig {
    pub gamma_scale: f64,
    pub j_scale: f64,
    /// Random corners of the hypercube evaluated per N.
    pub corners: usize,
    pub norm_bound: Option<f64>,
    /// Cube holding the perturbations; defaults to the bounding box of `K`.
    pub cube: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for AssouadConfig {
    fn default() -> Self {
        Self { gamma_scale: 0.5, j_scale: 1.0, corners: 8, norm_bound: None, cube: None }
    }
}

fn default_domain() -> Shape {
    Shape::unit_cube(1)
}
fn default_delta() -> f64 {
    0.125
}
fn default_replicates() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_domain")]
    pub domain: Shape,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub truth: TruthSpec,
    #[serde(default)]
    pub rate: RateSpec,
    /// Sample sizes, strictly increasing.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub chain: ChainSpec,
    #[serde(default)]
    pub kl: KlConfig,
    #[serde(default)]
    pub assouad: AssouadConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            domain: default_domain(),
            delta: default_delta(),
            truth: TruthSpec::default(),
            rate: RateSpec::default(),
            n_grid: Vec::new(),
            replicates: default_replicates(),
            sampling: SamplingSpec::default(),
            estimator: EstimatorSpec::default(),
            prior: PriorConfig::default(),
            chain: ChainSpec::default(),
            kl: KlConfig::default(),
            assouad: AssouadConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let regions = self.regions()?;
        self.rate_params(2)?;
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        let d = regions.dim();
        let bump_dims = match &self.truth {
            TruthSpec::Bumps { bumps, .. } => bumps.iter().all(|b| b.center.len() == d && b.radius > 0.0),
            TruthSpec::Constant { value } => *value > 0.0,
        };
        if !bump_dims {
            return Err(Error::Config("truth bumps must match the domain dimension and have positive radius".into()));
        }
        if let Some(dt) = self.sampling.d_interval {
            if !(dt > 0.0) {
                return Err(Error::Config("sampling interval must be positive".into()));
            }
        }
        if self.chain.iters <= self.chain.burn_in || self.chain.thin == 0 || self.chain.chains == 0 {
            return Err(Error::Config("chain needs iters > burn_in, thin >= 1 and chains >= 1".into()));
        }
        if !(self.prior.f_min > 0.0 && self.prior.f_min < 1.0) {
            return Err(Error::Config("prior f_min must lie in (0, 1)".into()));
        }
        self.wavelet_order()?;
        Ok(())
    }

    pub fn regions(&self) -> Result<NestedRegions> {
        NestedRegions::new(self.domain.clone().validated()?, self.delta)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn rate_params(&self, n: usize) -> Result<RateParams> {
        let rp = RateParams { d: self.dim(), a: self.rate.a, s: self.rate.s, n: n as f64 };
        rp.validate()?;
        Ok(rp)
    }

    pub fn wavelet_order(&self) -> Result<usize> {
        let p = self.estimator.wavelet_order.unwrap_or_else(|| (self.rate.s.floor() as usize).saturating_sub(1).max(4));
        if !(2..=10).contains(&p) {
            return Err(Error::UnsupportedOrder(p));
        }
        Ok(p)
    }

    pub fn family(&self) -> Result<Arc<WaveletFamily>> {
        Ok(Arc::new(WaveletFamily::new(self.wavelet_order()?)?))
    }

    pub fn coarse_level(&self, family: &WaveletFamily, regions: &NestedRegions) -> u32 {
        self.estimator.j0.unwrap_or_else(|| minimal_coarse_level(family, regions))
    }

    pub fn basis_for(&self, family: &Arc<WaveletFamily>, regions: &NestedRegions, n: usize) -> Result<Arc<BasisSpec>> {
        let j0 = self.coarse_level(family, regions);
        let j = self.estimator.level.level(n, j0, self.rate.s, self.dim());
        Ok(Arc::new(BasisSpec::new(family.clone(), regions.clone(), j0, j)?))
    }

    /// `D` for sample size `n`.
    pub fn d_interval(&self, n: usize) -> f64 {
        self.sampling.d_interval.unwrap_or_else(|| (n as f64).powf(-self.rate.a))
    }

    pub fn truncation(&self) -> f64 {
        self.estimator.truncation.unwrap_or(2.0 * self.truth.sup())
    }

    /// Simulation settings for `n` observations of `field` with the given seed.
    pub fn sde(&self, field: Arc<DiffusivityField>, sup: f64, n: usize, seed: u64) -> Result<SdeConfig> {
        let regions = self.regions()?;
        let dt = self.d_interval(n);
        let substeps = self.sampling.substeps.unwrap_or_else(|| default_substeps(dt, self.delta, sup, self.sampling.max_dt));
        let drift = match self.sampling.drift {
            DriftKind::Gradient => DriftMode::Gradient,
            DriftKind::None => DriftMode::None,
        };
        SdeConfig::new(field, drift, dt, n, substeps, seed, regions)
    }
}

/// Reads a configuration; `.toml` files are TOML, everything else JSON.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    cfg.validate()?;
    Ok(cfg)
}
