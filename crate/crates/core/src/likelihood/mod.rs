//! Gaussian proxy transition density, pseudo-likelihoods and Monte Carlo
//! Kullback-Leibler diagnostics.
//!
//! The exact transition density of the reflected diffusion has no closed
//! form. Every likelihood here uses the drift-free Euler proxy
//! `q_{f,D}(x, y) = (4π D f(x))^{-d/2} exp(-|y - x|² / (4 D f(x)))`,
//! so the KL diagnostics describe the proxy, not the exact kernel.

mod geodesic;

pub use geodesic::{dijkstra_distance, geodesic_distance, geodesic_expansion, GeodesicSolverSpec, LatticeSpec};

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{dist2, NestedRegions};
use crate::model::{DiffusivityField, GridField};
use crate::rng::{stream, StreamRng};
use crate::sim::{initial_draw, DriftMode, SdeConfig, ObservationSet};
use crate::stats::{mean, variance};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct ProxyModel {
    pub f: Arc<DiffusivityField>,
    /// Sampling interval `D`.
    pub d_interval: f64,
}

impl ProxyModel {
    pub fn new(f: Arc<DiffusivityField>, d_interval: f64) -> Result<Self> {
        if !(d_interval > 0.0) || !d_interval.is_finite() {
            return Err(Error::Config(format!("sampling interval must be positive, got {d_interval}")));
        }
        Ok(Self { f, d_interval })
    }
}

/// `log q_{f,D}(x, y)`.
pub fn log_q(model: &ProxyModel, x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    let fx = model.f.value(x);
    log_q_at(fx, model.d_interval, dist2(x, y), x.len())
}

fn log_q_at(fx: f64, d_interval: f64, r2: f64, d: usize) -> Result<f64> {
    if !(fx > 0.0) {
        return Err(Error::LowerBound { min: fx, bound: 0.0 });
    }
    let v = 4.0 * d_interval * fx;
    Ok(-0.5 * d as f64 * (PI * v).ln() - r2 / v)
}

/// `Σ_i log q(X_{(i-1)D}, X_{iD})`, optionally only over transitions starting
/// in the enlarged interior region.
pub fn proxy_loglik(model: &ProxyModel, obs: &ObservationSet, regions: &NestedRegions, restrict_interior: bool) -> Result<f64> {
    ensure_dim(regions.dim(), obs.dim)?;
    let mut total = 0.0;
    for i in 0..obs.n() {
        let x = obs.point(i);
        if restrict_interior && !regions.o0_delta.contains(x) {
            continue;
        }
        total += log_q(model, x, obs.point(i + 1))?;
    }
    Ok(total)
}

/// `Σ_i log(q_f / q_{f0})(X_{(i-1)D}, X_{iD}) 1_{A_i}`.
pub fn loglik_ratio(
    f: &DiffusivityField,
    f0: &DiffusivityField,
    d_interval: f64,
    obs: &ObservationSet,
    regions: &NestedRegions,
) -> Result<f64> {
    ensure_dim(regions.dim(), obs.dim)?;
    let d = obs.dim;
    let mut total = 0.0;
    for i in 0..obs.n() {
        let x = obs.point(i);
        if !regions.o0_delta.contains(x) {
            continue;
        }
        let r2 = dist2(x, obs.point(i + 1));
        total += log_q_at(f.value(x), d_interval, r2, d)? - log_q_at(f0.value(x), d_interval, r2, d)?;
    }
    Ok(total)
}

/// How the transitions driving the KL estimate are generated under `f0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransitionSource {
    /// Projected Euler simulation of the reflected diffusion with the given
    /// number of substeps per interval.
    Simulated { substeps: usize },
    /// One projected draw from the proxy `q_{f0,D}` per interval.
    Proxy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlSpec {
    /// Transitions per replicate path.
    pub n: usize,
    pub replicates: usize,
    pub source: TransitionSource,
    pub seed: u64,
}

/// Monte Carlo summary of `Λ = Σ_{i≤n} log(q_{f0}/q_f)(X_{i-1}, X_i) 1_{A_i}`
/// under stationary paths of `f0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlEstimate {
    /// `E[Λ] / n`.
    pub mean: f64,
    /// Standard error of `mean` across replicates.
    pub stderr: f64,
    /// `Var(Λ)` across replicates.
    pub var_sum: f64,
    /// Approximate standard error of `var_sum` (Gaussian theory).
    pub var_sum_stderr: f64,
    /// `sup |f - f0|` over a lattice of the domain, the neighbourhood report.
    pub sup_distance: f64,
}

/// Single-field version of [`mc_transition_kl_many`].
pub fn mc_transition_kl(
    f0: &Arc<DiffusivityField>,
    f: &Arc<DiffusivityField>,
    d_interval: f64,
    regions: &NestedRegions,
    spec: &KlSpec,
) -> Result<KlEstimate> {
    Ok(mc_transition_kl_many(f0, std::slice::from_ref(f), d_interval, regions, spec)?.remove(0))
}

/// KL estimates for several alternatives sharing the same simulated paths.
pub fn mc_transition_kl_many(
    f0: &Arc<DiffusivityField>,
    fields: &[Arc<DiffusivityField>],
    d_interval: f64,
    regions: &NestedRegions,
    spec: &KlSpec,
) -> Result<Vec<KlEstimate>> {
    if spec.n == 0 || spec.replicates < 2 {
        return Err(Error::Config("KL estimation needs n >= 1 and at least two replicates".into()));
    }
    let substeps = match spec.source {
        TransitionSource::Simulated { substeps } => substeps,
        TransitionSource::Proxy => 1,
    };
    let cfg = SdeConfig::new(f0.clone(), DriftMode::Gradient, d_interval, spec.n, substeps, spec.seed, regions.clone())?;
    let d = regions.dim();
    let sums: Vec<Result<Vec<f64>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(spec.seed, r as u64);
            let (mut x, _) = initial_draw(&regions.domain, &mut rng);
            let mut prev = x.clone();
            let mut st = cfg.stepper();
            let mut acc = vec![0.0; fields.len()];
            for _ in 0..spec.n {
                prev.copy_from_slice(&x);
                match spec.source {
                    TransitionSource::Simulated { .. } => {
                        st.advance(&mut x, &mut rng)?;
                    }
                    TransitionSource::Proxy => proxy_draw(f0, d_interval, &mut x, regions, &mut rng),
                }
                if !regions.o0_delta.contains(&prev) {
                    continue;
                }
                let r2 = dist2(&prev, &x);
                let l0 = log_q_at(f0.value(&prev), d_interval, r2, d)?;
                for (a, f) in acc.iter_mut().zip(fields) {
                    *a += l0 - log_q_at(f.value(&prev), d_interval, r2, d)?;
                }
            }
            Ok(acc)
        })
        .collect();
    let sums = sums.into_iter().collect::<Result<Vec<_>>>()?;
    let reps = spec.replicates as f64;
    let n = spec.n as f64;
    let per_axis = ((4096f64).powf(1.0 / d as f64) as usize).max(2);
    let (lo, hi) = regions.domain.bounding_box();
    let nodes: Vec<Vec<f64>> =
        GridField::nodes(&lo, &hi, &vec![per_axis; d]).into_iter().filter(|x| regions.domain.contains(x)).collect();
    Ok(fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let col: Vec<f64> = sums.iter().map(|s| s[k]).collect();
            let var_sum = variance(&col);
            KlEstimate {
                mean: mean(&col) / n,
                stderr: (var_sum / reps).sqrt() / n,
                var_sum,
                var_sum_stderr: var_sum * (2.0 / (reps - 1.0)).sqrt(),
                sup_distance: nodes.iter().map(|x| (f.value(x) - f0.value(x)).abs()).fold(0.0, f64::max),
            }
        })
        .collect())
}

fn proxy_draw(f0: &DiffusivityField, d_interval: f64, x: &mut [f64], regions: &NestedRegions, rng: &mut StreamRng) {
    let sd = (2.0 * d_interval * f0.value(x)).sqrt();
    for v in x.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sd * z;
    }
    regions.domain.project_in_place(x);
}
