//! Gaussian priors on the pre-link field and the pCN pseudo-posterior sampler.
//!
//! A prior draw `V` is rescaled to `W = V / N^{d/(4s+2d)}` and pushed through
//! the cutoff and link, `f = Φ(χ W)`.

mod pcn;

pub use pcn::{
    contraction_diag, pcn_step, run_chain, ChainConfig, ChainState, Posterior, PosteriorSummary, TraceRow,
};

use crate::error::{Error, Result};
use crate::model::GridField;
use crate::quadrature::integrate;
use crate::rng::{stream, StreamRng};
use crate::wavelet::{BasisSpec, CoeffVector};
use nalgebra::{Cholesky, DMatrix};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Matérn process on a regular lattice covering the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternSpec {
    /// Smoothness `s`; the Matérn regularity is `ν = s - d/2`.
    pub s: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
    /// Diagonal regularizer added before factorization.
    pub jitter: f64,
    /// Standard deviation at every point.
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

/// Largest lattice handled by the dense factorization.
pub const MATERN_MAX_POINTS: usize = 4096;

impl MaternSpec {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn nu(&self) -> f64 {
        self.s - self.dim() as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.lower.len() != d || self.upper.len() != d {
            return Err(Error::Config("Matérn lattice bounds and counts must share the dimension".into()));
        }
        if !(self.nu() > 0.0) {
            return Err(Error::Config(format!("Matérn prior needs s > d/2, got s = {}", self.s)));
        }
        if self.counts.iter().any(|&c| c < 2) || self.lower.iter().zip(&self.upper).any(|(a, b)| !(b > a)) {
            return Err(Error::Config("Matérn lattice needs at least two nodes per axis and a nonempty box".into()));
        }
        let m: usize = self.counts.iter().product();
        if m > MATERN_MAX_POINTS {
            return Err(Error::Config(format!("Matérn lattice has {m} points, above the dense limit {MATERN_MAX_POINTS}")));
        }
        if !(self.jitter >= 0.0) || !(self.amplitude > 0.0) {
            return Err(Error::Config("jitter must be nonnegative and amplitude positive".into()));
        }
        Ok(())
    }

    pub fn template(&self) -> GridField {
        let m = self.counts.iter().product();
        GridField { lower: self.lower.clone(), upper: self.upper.clone(), counts: self.counts.clone(), values: vec![0.0; m] }
    }
}

/// `log K_ν(r)` with `K_ν(r) = ∫_0^∞ exp(-r cosh t) cosh(ν t) dt`, `r > 0`.
pub fn log_bessel_k(nu: f64, r: f64) -> f64 {
    // Integrate exp(-r cosh t + ν t - peak) (1 + e^{-2νt}) / 2, cut where the
    // exponent has dropped 60 below its maximum.
    let expo = |t: f64| -r * t.cosh() + nu * t;
    let peak_t = if nu > r { (nu / r).asinh() } else { 0.0 };
    let peak = expo(peak_t);
    let mut upper = peak_t + 1.0;
    while expo(upper) > peak - 60.0 {
        upper *= 1.5;
    }
    let v = integrate(|t| (expo(t) - peak).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp()), 0.0, upper, 0.0, 1e-13);
    peak + v.ln()
}

/// Unit-variance Matérn correlation `2^{1-ν}/Γ(ν) r^ν K_ν(r)`.
pub fn matern_kernel(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let log_norm = (1.0 - nu) * std::f64::consts::LN_2 - libm::lgamma(nu);
    (log_norm + nu * r.ln() + log_bessel_k(nu, r)).exp()
}

/// Cached Cholesky factor of the lattice covariance.
#[derive(Clone, Debug)]
pub struct MaternSampler {
    pub spec: MaternSpec,
    factor: DMatrix<f64>,
    /// Jitter actually used.
    pub jitter: f64,
}

impl MaternSampler {
    pub fn new(spec: MaternSpec) -> Result<Self> {
        spec.validate()?;
        let cov = covariance_matrix(&spec);
        let mut jitter = spec.jitter;
        for attempt in 0..2 {
            let mut c = cov.clone();
            for i in 0..c.nrows() {
                c[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(c) {
                return Ok(Self { spec, factor: ch.l(), jitter });
            }
            if attempt == 0 {
                jitter = (jitter * 100.0).max(1e-10);
            }
        }
        Err(Error::Numerical(format!("Matérn covariance not positive definite with jitter {jitter:e}")))
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        let m = self.len();
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut *rng)).collect();
        (0..m).map(|i| (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum::<f64>()).collect()
    }
}

/// Covariance `σ² k(|x_i - x_j|)` on the lattice, computed once per distinct
/// index offset.
pub fn covariance_matrix(spec: &MaternSpec) -> DMatrix<f64> {
    let nodes = GridField::nodes(&spec.lower, &spec.upper, &spec.counts);
    let d = spec.dim();
    let h: Vec<f64> = (0..d).map(|i| (spec.upper[i] - spec.lower[i]) / (spec.counts[i] - 1) as f64).collect();
    let nu = spec.nu();
    let var = spec.amplitude * spec.amplitude;
    let offsets: usize = spec.counts.iter().product();
    let mut table = vec![f64::NAN; offsets];
    let m = nodes.len();
    let mut c = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut key = 0usize;
            let mut r2 = 0.0;
            for i in 0..d {
                let k = ((nodes[a][i] - nodes[b][i]).abs() / h[i]).round() as usize;
                key = key * spec.counts[i] + k;
                r2 += (k as f64 * h[i]).powi(2);
            }
            if table[key].is_nan() {
                table[key] = var * matern_kernel(nu, r2.sqrt());
            }
            c[(a, b)] = table[key];
            c[(b, a)] = table[key];
        }
    }
    c
}

/// One Matérn draw on the lattice, stream 0 of `seed`.
pub fn sample_matern(spec: &MaternSpec, seed: u64) -> Result<GridField> {
    let sampler = MaternSampler::new(spec.clone())?;
    let mut rng = stream(seed, 0);
    let mut g = spec.template();
    g.values = sampler.draw(&mut rng);
    Ok(g)
}

/// Truncated Gaussian wavelet series `Σ_l Σ_r σ 2^{-(l - l_ref) s} g_{lr} ψ_{lr}`
/// over the levels of `basis`.
///
/// With `amplitude = 1` and `reference_level = 0` this is the plain series
/// `Σ 2^{-ls} g_{lr} ψ_{lr}`.
#[derive(Clone, Debug)]
pub struct WaveletPriorSpec {
    pub s: f64,
    pub amplitude: f64,
    pub reference_level: u32,
    pub basis: Arc<BasisSpec>,
}

impl WaveletPriorSpec {
    pub fn new(s: f64, basis: Arc<BasisSpec>) -> Self {
        Self { s, amplitude: 1.0, reference_level: 0, basis }
    }

    /// Per-coefficient standard deviations.
    pub fn std_devs(&self) -> Vec<f64> {
        self.basis
            .indices()
            .iter()
            .map(|idx| self.amplitude * 2f64.powf(-(idx.level as f64 - self.reference_level as f64) * self.s))
            .collect()
    }
}

pub fn sample_wavelet_series(spec: &WaveletPriorSpec, seed: u64) -> CoeffVector {
    let mut rng = stream(seed, 0);
    let values = spec
        .std_devs()
        .into_iter()
        .map(|sd| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    CoeffVector { basis: spec.basis.clone(), values }
}

/// `N^{d/(4s+2d)}`.
pub fn rescale_divisor(n: usize, s: f64, d: usize) -> f64 {
    let d = d as f64;
    (n.max(1) as f64).powf(d / (4.0 * s + 2.0 * d))
}

/// A draw of the pre-link field in either representation.
#[derive(Clone, Debug)]
pub enum PriorDraw {
    Grid(GridField),
    Wavelet(CoeffVector),
}

/// `W = V / N^{d/(4s+2d)}`, applied to grid values or coefficients.
pub fn rescale(v: &PriorDraw, n: usize, s: f64, d: usize) -> PriorDraw {
    let k = rescale_divisor(n, s, d);
    match v {
        PriorDraw::Grid(g) => {
            let mut g = g.clone();
            g.values.iter_mut().for_each(|x| *x /= k);
            PriorDraw::Grid(g)
        }
        PriorDraw::Wavelet(c) => {
            let mut c = c.clone();
            c.values.iter_mut().for_each(|x| *x /= k);
            PriorDraw::Wavelet(c)
        }
    }
}

impl PriorDraw {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            PriorDraw::Grid(g) => g.value(x),
            PriorDraw::Wavelet(c) => c.evaluate(x),
        }
    }
}

#[derive(Clone, Debug)]
pub enum PriorSpec {
    Matern(MaternSpec),
    Wavelet(WaveletPriorSpec),
}

impl PriorSpec {
    pub fn s(&self) -> f64 {
        match self {
            PriorSpec::Matern(m) => m.s,
            PriorSpec::Wavelet(w) => w.s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NestedRegions, Shape};
    use crate::wavelet::WaveletFamily;

    fn matern_1d(s: f64, n: usize) -> MaternSpec {
        MaternSpec { s, lower: vec![0.0], upper: vec![1.0], counts: vec![n], jitter: 1e-10, amplitude: 1.0 }
    }

    #[test]
    fn half_integer_kernels_have_closed_forms() {
        for r in [1e-3f64, 0.05, 0.3, 1.0, 2.5, 7.0] {
            let e = (-r).exp();
            assert!((matern_kernel(0.5, r) - e).abs() < 1e-10, "r = {r}");
            assert!((matern_kernel(1.5, r) - (1.0 + r) * e).abs() < 1e-10);
            assert!((matern_kernel(2.5, r) - (1.0 + r + r * r / 3.0) * e).abs() < 1e-10);
        }
    }

    #[test]
    fn covariance_is_psd_and_draws_are_seeded() {
        let spec = matern_1d(2.0, 65);
        let c = covariance_matrix(&spec);
        assert!((c.clone() - c.transpose()).amax() == 0.0);
        let ev = c.symmetric_eigenvalues();
        assert!(ev.min() >= -1e-8);
        let a = sample_matern(&spec, 9).unwrap();
        let b = sample_matern(&spec, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_lattice_and_rough_prior_are_rejected() {
        let mut spec = matern_1d(2.0, 5000);
        assert!(MaternSampler::new(spec.clone()).is_err());
        spec.counts = vec![10];
        spec.s = 0.4;
        assert!(MaternSampler::new(spec).is_err());
    }

    #[test]
    fn rescale_divisor_worked_values() {
        assert_eq!(rescale_divisor(1, 2.0, 1), 1.0);
        assert!((rescale_divisor(1024, 2.0, 1) - 2.0).abs() < 1e-14);
        // d/(4s+2d) with d = 2, s = 3 is 1/8.
        assert!((rescale_divisor(256, 3.0, 2) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn wavelet_series_levels_and_rescale_linearity() {
        let fam = Arc::new(WaveletFamily::new(2).unwrap());
        let regions = NestedRegions::new(Shape::unit_cube(1), 0.16).unwrap();
        let basis = Arc::new(BasisSpec::new(fam, regions, 5, 6).unwrap());
        let spec = WaveletPriorSpec::new(1.5, basis.clone());
        for (idx, sd) in basis.indices().iter().zip(spec.std_devs()) {
            assert_eq!(sd, 2f64.powf(-1.5 * idx.level as f64));
        }
        let v = sample_wavelet_series(&spec, 4);
        let w = rescale(&PriorDraw::Wavelet(v.clone()), 1000, 1.5, 1);
        let k = rescale_divisor(1000, 1.5, 1);
        for x in [0.4, 0.5, 0.61] {
            assert!((w.value(&[x]) - v.evaluate(&[x]) / k).abs() < 1e-13);
        }
    }
}
