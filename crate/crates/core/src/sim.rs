//! Projected Euler simulation of the reflected diffusion
//! `dX = b dt + sqrt(2 f(X)) dB + dℓ` on a convex domain.

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{unit_open, NestedRegions, Shape};
use crate::model::DiffusivityField;
use crate::rng::{stream, StreamRng};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Drift `b(∇f(x), x)`.
#[derive(Clone)]
pub enum DriftMode {
    /// `b = ∇f(x)`, the reflected divergence-form diffusion.
    Gradient,
    /// `b = G(x)`, an independent drift.
    Generic(DriftFn),
    None,
}

impl fmt::Debug for DriftMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftMode::Gradient => write!(f, "Gradient"),
            DriftMode::Generic(_) => write!(f, "Generic(..)"),
            DriftMode::None => write!(f, "None"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdeConfig {
    pub f: Arc<DiffusivityField>,
    pub drift: DriftMode,
    /// Sampling interval `D`.
    pub d_interval: f64,
    /// Number of observed increments.
    pub n: usize,
    /// Euler substeps per sampling interval.
    pub substeps: usize,
    pub seed: u64,
    pub regions: NestedRegions,
}

/// Substeps so that `δt = D/m` is at most `(δ/10)^2 / (2 sup f)` and, when
/// given, at most `max_dt`.
pub fn default_substeps(d_interval: f64, delta: f64, f_sup: f64, max_dt: Option<f64>) -> usize {
    let mut dt = (delta / 10.0).powi(2) / (2.0 * f_sup);
    if let Some(m) = max_dt {
        dt = dt.min(m);
    }
    ((d_interval / dt).ceil() as usize).max(1)
}

impl SdeConfig {
    pub fn new(
        f: Arc<DiffusivityField>,
        drift: DriftMode,
        d_interval: f64,
        n: usize,
        substeps: usize,
        seed: u64,
        regions: NestedRegions,
    ) -> Result<Self> {
        let c = Self { f, drift, d_interval, n, substeps, seed, regions };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_interval > 0.0) || !self.d_interval.is_finite() {
            return Err(Error::Config(format!("sampling interval must be positive, got {}", self.d_interval)));
        }
        if self.n == 0 || self.substeps == 0 {
            return Err(Error::Config("N and the substep count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.regions.dim()
    }

    /// `(N D, N D^2)`: the time horizon and the high-frequency indicator.
    pub fn regime(&self) -> (f64, f64) {
        let n = self.n as f64;
        (n * self.d_interval, n * self.d_interval * self.d_interval)
    }

    /// A stepper carrying scratch buffers for this configuration.
    pub fn stepper(&self) -> Stepper<'_> {
        let d = self.dim();
        Stepper { cfg: self, dt: self.d_interval / self.substeps as f64, drift: vec![0.0; d], start: vec![0.0; d], noise: vec![0.0; d] }
    }
}

/// Advances the state over one sampling interval.
pub struct Stepper<'a> {
    cfg: &'a SdeConfig,
    dt: f64,
    drift: Vec<f64>,
    start: Vec<f64>,
    noise: Vec<f64>,
}

/// What happened during one sampling interval.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntervalOutcome {
    /// The projection moved the point at some substep.
    pub touched: bool,
    /// `Σ_j 2 (X_j - X_0) · sqrt(2 f(X_j) δt) ξ_j`, the discrete martingale part
    /// of `|X_D - X_0|^2`.
    pub martingale: f64,
}

impl Stepper<'_> {
    pub fn advance(&mut self, x: &mut [f64], rng: &mut StreamRng) -> Result<IntervalOutcome> {
        let cfg = self.cfg;
        let domain = &cfg.regions.domain;
        self.start.copy_from_slice(x);
        let mut out = IntervalOutcome::default();
        for _ in 0..cfg.substeps {
            let fx = cfg.f.value(x);
            if !(fx > 0.0) {
                return Err(Error::Numerical(format!("diffusivity {fx} at {x:?} is not positive")));
            }
            match &cfg.drift {
                DriftMode::None => self.drift.iter_mut().for_each(|v| *v = 0.0),
                DriftMode::Gradient => cfg.f.gradient(x, &mut self.drift),
                DriftMode::Generic(g) => g(x, &mut self.drift),
            }
            let sd = (2.0 * fx * self.dt).sqrt();
            for (i, v) in x.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                let dw = sd * z;
                self.noise[i] = dw;
                out.martingale += 2.0 * (*v - self.start[i]) * dw;
                *v += self.drift[i] * self.dt + dw;
            }
            if domain.project_in_place(x) {
                out.touched = true;
            }
        }
        Ok(out)
    }
}

/// Discrete observations `X_0, X_D, ..., X_{ND}` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub dim: usize,
    pub d_interval: f64,
    pub seed: u64,
    pub points: Vec<f64>,
    pub truth_id: Option<String>,
}

impl ObservationSet {
    pub fn new(dim: usize, d_interval: f64, seed: u64, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 || points.is_empty() {
            return Err(Error::Parse(format!("{} coordinates do not form {dim}-dimensional points", points.len())));
        }
        Ok(Self { dim, d_interval, seed, points, truth_id: None })
    }

    /// Number of increments `N`.
    pub fn n(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// `Y_i = |X_{iD} - X_{(i-1)D}|^2 / (2 d D)` for `i = 1..=N`.
    pub fn increments_y(&self) -> Vec<f64> {
        let scale = 1.0 / (2.0 * self.dim as f64 * self.d_interval);
        (1..=self.n())
            .map(|i| crate::geometry::dist2(self.point(i), self.point(i - 1)) * scale)
            .collect()
    }
}

/// Uniform draw on the domain; balls use rejection from the bounding box.
/// Returns the point and the number of proposals used.
pub fn initial_draw(domain: &Shape, rng: &mut StreamRng) -> (Vec<f64>, usize) {
    let (lo, hi) = domain.bounding_box();
    let mut x = vec![0.0; lo.len()];
    let mut attempts = 0;
    loop {
        attempts += 1;
        for i in 0..x.len() {
            x[i] = lo[i] + (hi[i] - lo[i]) * unit_open(rng);
        }
        if domain.contains(&x) {
            return (x, attempts);
        }
    }
}

/// Simulates a path started from the uniform law on the domain.
pub fn sample_path(cfg: &SdeConfig) -> Result<ObservationSet> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let (x0, _) = initial_draw(&cfg.regions.domain, &mut rng);
    sample_path_from(cfg, &x0, &mut rng)
}

pub fn sample_path_from(cfg: &SdeConfig, x0: &[f64], rng: &mut StreamRng) -> Result<ObservationSet> {
    ensure_dim(cfg.dim(), x0.len())?;
    let d = cfg.dim();
    let mut points = Vec::with_capacity((cfg.n + 1) * d);
    let mut x = x0.to_vec();
    cfg.regions.domain.project_in_place(&mut x);
    points.extend_from_slice(&x);
    let mut st = cfg.stepper();
    for _ in 0..cfg.n {
        st.advance(&mut x, rng)?;
        points.extend_from_slice(&x);
    }
    Ok(ObservationSet { dim: d, d_interval: cfg.d_interval, seed: cfg.seed, points, truth_id: None })
}

/// Where independent one-interval transitions start.
#[derive(Clone, Debug)]
pub enum StartRule {
    Fixed(Vec<f64>),
    Uniform(Shape),
}

/// Independent single-interval transitions; transition `k` uses stream `k`
/// of the configured seed.
#[derive(Clone, Debug, Default)]
pub struct TransitionSample {
    pub y: Vec<f64>,
    /// `Y` minus its discrete martingale part: same mean, smaller variance.
    pub y_compensated: Vec<f64>,
    pub touched: Vec<bool>,
}

pub fn interval_transitions(cfg: &SdeConfig, start: &StartRule, count: usize) -> Result<TransitionSample> {
    cfg.validate()?;
    let d = cfg.dim();
    let scale = 1.0 / (2.0 * d as f64 * cfg.d_interval);
    let rows: Vec<Result<(f64, f64, bool)>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, k as u64);
            let mut x = match start {
                StartRule::Fixed(p) => p.clone(),
                StartRule::Uniform(s) => {
                    let mut p = vec![0.0; d];
                    s.sample_uniform(&mut rng, &mut p);
                    p
                }
            };
            let x0 = x.clone();
            let mut st = cfg.stepper();
            let o = st.advance(&mut x, &mut rng)?;
            let y = crate::geometry::dist2(&x, &x0) * scale;
            Ok((y, y - o.martingale * scale, o.touched))
        })
        .collect();
    let mut out = TransitionSample::default();
    for r in rows {
        let (y, yc, t) = r?;
        out.y.push(y);
        out.y_compensated.push(yc);
        out.touched.push(t);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitFrequency {
    pub hits: usize,
    pub trials: usize,
    pub frequency: f64,
    /// Binomial standard error.
    pub stderr: f64,
}

/// Fraction of sampling intervals started uniformly in `start_region` whose
/// Euler path touches the boundary.
pub fn boundary_hit_frequency(cfg: &SdeConfig, start_region: &Shape, trials: usize) -> Result<HitFrequency> {
    let (lo, hi) = start_region.bounding_box();
    if !cfg.regions.o0_delta.contains_rect(&lo, &hi) {
        return Err(Error::InvalidRegion("start region must lie inside the enlarged interior region".into()));
    }
    let t = interval_transitions(cfg, &StartRule::Uniform(start_region.clone()), trials)?;
    let hits = t.touched.iter().filter(|&&b| b).count();
    let p = hits as f64 / trials as f64;
    Ok(HitFrequency { hits, trials, frequency: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() })
}

/// `2d exp(-δ^2 / (20 d ‖f‖_∞ D))`.
pub fn hitting_bound(d: usize, delta: f64, f_sup: f64, d_interval: f64) -> f64 {
    let d = d as f64;
    2.0 * d * (-delta * delta / (20.0 * d * f_sup * d_interval)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathDiagnostics {
    pub bins_per_axis: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Normalized occupation mass, last axis fastest.
    pub histogram: Vec<f64>,
    pub mean_y: f64,
    pub var_y: f64,
}

impl PathDiagnostics {
    /// Bin index of a point.
    pub fn bin(&self, x: &[f64]) -> usize {
        bin_of(x, &self.lower, &self.upper, self.bins_per_axis)
    }
}

fn bin_of(x: &[f64], lo: &[f64], hi: &[f64], bins: usize) -> usize {
    let mut lin = 0;
    for i in 0..x.len() {
        let t = ((x[i] - lo[i]) / (hi[i] - lo[i]) * bins as f64).floor();
        lin = lin * bins + (t.max(0.0) as usize).min(bins - 1);
    }
    lin
}

/// Occupation histogram over the domain's bounding box, plus the first two
/// moments of the `Y_i`.
pub fn occupation_histogram(obs: &ObservationSet, domain: &Shape, bins: usize) -> Result<PathDiagnostics> {
    if bins == 0 {
        return Err(Error::Config("need at least one bin per axis".into()));
    }
    ensure_dim(domain.dim(), obs.dim)?;
    let (lower, upper) = domain.bounding_box();
    let mut histogram = vec![0.0; bins.pow(obs.dim as u32)];
    let total = obs.n() + 1;
    for i in 0..total {
        histogram[bin_of(obs.point(i), &lower, &upper, bins)] += 1.0 / total as f64;
    }
    let y = obs.increments_y();
    let mean_y = crate::stats::mean(&y);
    let var_y = if y.len() > 1 { crate::stats::variance(&y) } else { 0.0 };
    Ok(PathDiagnostics { bins_per_axis: bins, lower, upper, histogram, mean_y, var_y })
}
