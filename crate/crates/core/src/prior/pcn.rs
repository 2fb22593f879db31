//! Preconditioned Crank-Nicolson sampling of the proxy pseudo-posterior.

use super::{rescale_divisor, MaternSampler, PriorSpec};
use crate::error::{Error, Result};
use crate::estimator::SparseRow;
use crate::geometry::{dist2, NestedRegions};
use crate::model::{link_phi, Cutoff, DiffusivityField, GridField};
use crate::rng::{stream, StreamRng};
use crate::sim::ObservationSet;
use crate::stats::effective_sample_size;
use crate::wavelet::BasisSpec;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug)]
enum PriorKernel {
    Matern(MaternSampler),
    Wavelet { basis: Arc<BasisSpec>, sd: Vec<f64> },
}

impl PriorKernel {
    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            PriorKernel::Matern(m) => m.draw(rng),
            PriorKernel::Wavelet { sd, .. } => sd
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    s * z
                })
                .collect(),
        }
    }

    fn row(&self, x: &[f64], out: &mut SparseRow) {
        match self {
            PriorKernel::Matern(m) => m.spec.template().weights(x, out),
            PriorKernel::Wavelet { basis, .. } => basis.eval_row(x, out),
        }
    }
}

/// Data and evaluation-grid designs for the pseudo-posterior of `f = Φ(χ W)`.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub regions: NestedRegions,
    pub f_min: f64,
    pub s: f64,
    /// `N^{d/(4s+2d)}`.
    pub divisor: f64,
    pub d_interval: f64,
    prior: PriorKernel,
    /// Contribution of transitions where `χ = 0`, so `f = 1`.
    constant: f64,
    rows: Vec<SparseRow>,
    chi: Vec<f64>,
    r2: Vec<f64>,
    eval: EvalGrid,
}

#[derive(Clone, Debug)]
struct EvalGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    rows: Vec<SparseRow>,
    chi: Vec<f64>,
    /// Trapezoid weights, zero off the domain.
    weights: Vec<f64>,
    outside_o0: Vec<bool>,
}

fn log_q_term(f: f64, r2: f64, d: f64, d_interval: f64) -> f64 {
    let v = 4.0 * d_interval * f;
    -0.5 * d * (PI * v).ln() - r2 / v
}

impl Posterior {
    /// `eval_nodes` is the number of evaluation nodes per axis of the domain's
    /// bounding box.
    pub fn new(obs: &ObservationSet, prior: &PriorSpec, regions: &NestedRegions, f_min: f64, eval_nodes: usize) -> Result<Self> {
        let d = regions.dim();
        if obs.dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: obs.dim });
        }
        if !(f_min > 0.0 && f_min < 1.0) {
            return Err(Error::Config(format!("f_min must lie in (0, 1), got {f_min}")));
        }
        if eval_nodes < 2 {
            return Err(Error::Config("at least two evaluation nodes per axis are needed".into()));
        }
        let kernel = match prior {
            PriorSpec::Matern(m) => {
                if m.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
                }
                PriorKernel::Matern(MaternSampler::new(m.clone())?)
            }
            PriorSpec::Wavelet(w) => {
                if w.basis.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: w.basis.dim() });
                }
                PriorKernel::Wavelet { basis: w.basis.clone(), sd: w.std_devs() }
            }
        };
        let cutoff = Cutoff::new(regions.clone());
        let dd = d as f64;
        let mut constant = 0.0;
        let (mut rows, mut chi, mut r2) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..obs.n() {
            let x = obs.point(i);
            if !regions.o0_delta.contains(x) {
                continue;
            }
            let q = dist2(x, obs.point(i + 1));
            let c = cutoff.value(x);
            if c == 0.0 {
                constant += log_q_term(1.0, q, dd, obs.d_interval);
                continue;
            }
            let mut row = Vec::new();
            kernel.row(x, &mut row);
            rows.push(row);
            chi.push(c);
            r2.push(q);
        }
        let (lower, upper) = regions.domain.bounding_box();
        let counts = vec![eval_nodes; d];
        let nodes = GridField::nodes(&lower, &upper, &counts);
        let h: Vec<f64> = (0..d).map(|i| (upper[i] - lower[i]) / (eval_nodes - 1) as f64).collect();
        let mut eval = EvalGrid {
            lower: lower.clone(),
            upper: upper.clone(),
            counts,
            rows: Vec::with_capacity(nodes.len()),
            chi: Vec::with_capacity(nodes.len()),
            weights: Vec::with_capacity(nodes.len()),
            outside_o0: Vec::with_capacity(nodes.len()),
        };
        for x in &nodes {
            let mut row = Vec::new();
            kernel.row(x, &mut row);
            eval.rows.push(row);
            eval.chi.push(cutoff.value(x));
            let w: f64 = (0..d)
                .map(|i| {
                    let edge = (x[i] - lower[i]).abs() < 1e-12 || (x[i] - upper[i]).abs() < 1e-12;
                    if edge {
                        0.5 * h[i]
                    } else {
                        h[i]
                    }
                })
                .product();
            eval.weights.push(if regions.domain.contains(x) { w } else { 0.0 });
            eval.outside_o0.push(!regions.o0.contains(x) || regions.o0.inset_distance(x) <= 0.0);
        }
        Ok(Self {
            regions: regions.clone(),
            f_min,
            s: prior.s(),
            divisor: rescale_divisor(obs.n(), prior.s(), d),
            d_interval: obs.d_interval,
            prior: kernel,
            constant,
            rows,
            chi,
            r2,
            eval,
        })
    }

    /// Length of the `V` representation.
    pub fn len(&self) -> usize {
        match &self.prior {
            PriorKernel::Matern(m) => m.len(),
            PriorKernel::Wavelet { sd, .. } => sd.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Transitions whose proxy density depends on `V`.
    pub fn informative_transitions(&self) -> usize {
        self.rows.len()
    }

    pub fn prior_draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.prior.draw(rng)
    }

    /// Proxy log-likelihood of `Φ(χ V / divisor)` over transitions starting
    /// in the enlarged interior region.
    pub fn loglik(&self, v: &[f64]) -> f64 {
        let d = self.regions.dim() as f64;
        let mut total = self.constant;
        for ((row, &c), &q) in self.rows.iter().zip(&self.chi).zip(&self.r2) {
            let w: f64 = row.iter().map(|&(k, b)| b * v[k]).sum::<f64>() / self.divisor;
            total += log_q_term(link_phi(c * w, self.f_min), q, d, self.d_interval);
        }
        total
    }

    fn eval_field(&self, v: &[f64], out: &mut [f64]) {
        for (j, (row, &c)) in self.eval.rows.iter().zip(&self.eval.chi).enumerate() {
            out[j] = if c == 0.0 {
                1.0
            } else {
                let w: f64 = row.iter().map(|&(k, b)| b * v[k]).sum::<f64>() / self.divisor;
                link_phi(c * w, self.f_min)
            };
        }
    }

    /// Grid dump of `f` at the evaluation nodes.
    pub fn field_grid(&self, v: &[f64]) -> GridField {
        let mut values = vec![0.0; self.eval.rows.len()];
        self.eval_field(v, &mut values);
        GridField { lower: self.eval.lower.clone(), upper: self.eval.upper.clone(), counts: self.eval.counts.clone(), values }
    }

    /// Evaluation nodes in storage order.
    pub fn eval_nodes(&self) -> Vec<Vec<f64>> {
        GridField::nodes(&self.eval.lower, &self.eval.upper, &self.eval.counts)
    }
}

/// Current `V` and its cached pseudo-log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub v: Vec<f64>,
    pub loglik: f64,
}

impl ChainState {
    pub fn new(post: &Posterior, v: Vec<f64>) -> Self {
        let loglik = post.loglik(&v);
        Self { v, loglik }
    }

    pub fn is_consistent(&self, post: &Posterior) -> bool {
        let l = post.loglik(&self.v);
        (l - self.loglik).abs() <= 1e-9 * (1.0 + l.abs())
    }
}

/// `V' = sqrt(1 - β²) V + β ξ` with `ξ` a fresh prior draw, accepted with
/// probability `min(1, exp(Λ(V') - Λ(V)))`.
pub fn pcn_step(post: &Posterior, state: &ChainState, beta: f64, rng: &mut StreamRng) -> (ChainState, bool) {
    let xi = post.prior_draw(rng);
    let a = (1.0 - beta * beta).max(0.0).sqrt();
    let v: Vec<f64> = state.v.iter().zip(&xi).map(|(w, z)| a * w + beta * z).collect();
    let loglik = post.loglik(&v);
    let log_u = rng.random::<f64>().ln();
    if log_u < loglik - state.loglik {
        (ChainState { v, loglik }, true)
    } else {
        (state.clone(), false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial step; adapted during burn-in when `adapt` is set.
    pub beta: f64,
    pub adapt: bool,
    pub seed: u64,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burn_in {
            return Err(Error::Config("iterations must exceed burn-in".into()));
        }
        if self.thin == 0 || !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config("thinning must be positive and beta in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loglik: f64,
    pub accept: bool,
    /// `‖f - f0‖_2`, NaN without a reference truth.
    pub l2_to_truth: f64,
}

#[derive(Clone, Debug)]
pub struct PosteriorSummary {
    /// Pseudo-posterior mean of `f` at the evaluation nodes.
    pub mean_field: GridField,
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
    /// Step used after burn-in.
    pub beta: f64,
    pub trace: Vec<TraceRow>,
    /// Effective sample size of the kept log-likelihood trace.
    pub ess: f64,
    pub warnings: Vec<String>,
}

impl PosteriorSummary {
    pub fn mean_diffusivity(&self, f_min: f64) -> DiffusivityField {
        DiffusivityField::direct(crate::model::ScalarField::Grid(self.mean_field.clone()), f_min)
    }

    /// Third- and last-quarter means of the `‖f - f0‖_2` trace.
    pub fn l2_quarters(&self) -> Option<(f64, f64)> {
        let n = self.trace.len();
        if n < 4 || self.trace[0].l2_to_truth.is_nan() {
            return None;
        }
        let q = |a: usize, b: usize| self.trace[a..b].iter().map(|r| r.l2_to_truth).sum::<f64>() / (b - a) as f64;
        Some((q(n / 2, 3 * n / 4), q(3 * n / 4, n)))
    }

    /// Pools chains run on the same data: mean fields weighted by kept states.
    pub fn pool(chains: &[PosteriorSummary]) -> Result<PosteriorSummary> {
        let first = chains.first().ok_or_else(|| Error::Config("no chains to pool".into()))?;
        let total: usize = chains.iter().map(|c| c.trace.len()).sum();
        let mut mean = first.mean_field.clone();
        mean.values.iter_mut().for_each(|v| *v = 0.0);
        let mut trace = Vec::with_capacity(total);
        let mut warnings = Vec::new();
        let mut acc = 0.0;
        for c in chains {
            if c.mean_field.values.len() != mean.values.len() {
                return Err(Error::Config("chains use different evaluation grids".into()));
            }
            let w = c.trace.len() as f64 / total as f64;
            for (m, v) in mean.values.iter_mut().zip(&c.mean_field.values) {
                *m += w * v;
            }
            acc += w * c.acceptance;
            trace.extend_from_slice(&c.trace);
            warnings.extend(c.warnings.iter().cloned());
        }
        let ess = chains.iter().map(|c| c.ess).sum();
        Ok(PosteriorSummary { mean_field: mean, acceptance: acc, beta: first.beta, trace, ess, warnings })
    }
}

/// Runs one pCN chain from a prior draw. Stream 0 of the seed gives the
/// initial state, stream 1 drives the chain.
pub fn run_chain(post: &Posterior, cfg: &ChainConfig, truth: Option<&DiffusivityField>) -> Result<PosteriorSummary> {
    cfg.validate()?;
    let nodes = post.eval_nodes();
    let truth_vals: Option<Vec<f64>> = truth.map(|f| nodes.iter().map(|x| f.value(x)).collect());
    let mut rng0 = stream(cfg.seed, 0);
    let mut state = ChainState::new(post, post.prior_draw(&mut rng0));
    let mut rng = stream(cfg.seed, 1);
    let mut beta = cfg.beta;
    let mut window = (0usize, 0usize);
    let mut accepted_after = 0usize;
    let mut buf = vec![0.0; nodes.len()];
    let mut mean = vec![0.0; nodes.len()];
    let mut trace = Vec::new();
    for it in 0..cfg.iters {
        let (next, acc) = pcn_step(post, &state, beta, &mut rng);
        state = next;
        if it < cfg.burn_in {
            if cfg.adapt {
                window.0 += acc as usize;
                window.1 += 1;
                if window.1 == 100 {
                    let rate = window.0 as f64 / 100.0;
                    if rate < 0.15 {
                        beta *= 0.7;
                    } else if rate > 0.4 {
                        beta = (beta * 1.3).min(1.0);
                    }
                    window = (0, 0);
                }
            }
            continue;
        }
        accepted_after += acc as usize;
        if (it - cfg.burn_in) % cfg.thin != 0 {
            continue;
        }
        post.eval_field(&state.v, &mut buf);
        for (j, &f) in buf.iter().enumerate() {
            if f < post.f_min || (post.eval.outside_o0[j] && f != 1.0) {
                return Err(Error::Numerical(format!("visited field violates the link guarantee at node {j}: {f}")));
            }
        }
        mean.iter_mut().zip(&buf).for_each(|(m, f)| *m += f);
        let l2 = match &truth_vals {
            Some(t) => buf.iter().zip(t).zip(&post.eval.weights).map(|((a, b), w)| w * (a - b).powi(2)).sum::<f64>().sqrt(),
            None => f64::NAN,
        };
        trace.push(TraceRow { iter: it, loglik: state.loglik, accept: acc, l2_to_truth: l2 });
    }
    let kept = trace.len() as f64;
    mean.iter_mut().for_each(|m| *m /= kept);
    let acceptance = accepted_after as f64 / (cfg.iters - cfg.burn_in) as f64;
    let mut warnings = Vec::new();
    if !(0.01..=0.99).contains(&acceptance) {
        warnings.push(format!("acceptance rate {acceptance:.3} outside [0.01, 0.99] with beta {beta:.3e}"));
    }
    let ess = effective_sample_size(&trace.iter().map(|r| r.loglik).collect::<Vec<_>>());
    Ok(PosteriorSummary {
        mean_field: GridField { lower: post.eval.lower.clone(), upper: post.eval.upper.clone(), counts: post.eval.counts.clone(), values: mean },
        acceptance,
        beta,
        trace,
        ess,
        warnings,
    })
}

/// Fraction of kept states with `‖f - f0‖_2 ≥ M ξ_N`.
pub fn contraction_diag(summary: &PosteriorSummary, m: f64, xi: f64) -> Result<f64> {
    if summary.trace.is_empty() {
        return Err(Error::Config("empty chain".into()));
    }
    if summary.trace[0].l2_to_truth.is_nan() {
        return Err(Error::Config("chain was run without a reference truth".into()));
    }
    let r = m * xi;
    Ok(summary.trace.iter().filter(|t| t.l2_to_truth >= r).count() as f64 / summary.trace.len() as f64)
}
