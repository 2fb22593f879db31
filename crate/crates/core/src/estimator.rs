//! Truncated wavelet least-squares estimator of the diffusivity.

use crate::error::{Error, Result};
use crate::geometry::{NestedRegions, Shape};
use crate::model::{l2_distance, DiffusivityField, ScalarField};
use crate::sim::ObservationSet;
use crate::wavelet::{BasisSpec, CoeffVector, WaveletFamily};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use std::sync::Arc;

/// Relative singular-value cut for the minimal-norm solution.
pub const RANK_TOL: f64 = 1e-10;
/// Largest basis the dense solvers accept; the Gram matrix alone is `8 K²` bytes.
pub const MAX_DENSE_COLUMNS: usize = 4096;
/// Normal equations are used only when `λ_min(XᵀX) / λ_max(XᵀX)` exceeds this.
const NORMAL_EQ_MIN_RATIO: f64 = 1e-6;

/// Sparse row `(column, value)`.
pub type SparseRow = Vec<(usize, f64)>;

/// Sparse linear least-squares system `min_c |y - X c|`.
#[derive(Clone, Debug, Default)]
pub struct SparseSystem {
    pub columns: usize,
    pub rows: Vec<SparseRow>,
    pub responses: Vec<f64>,
}

impl SparseSystem {
    pub fn dense_design(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.rows.len(), self.columns);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                x[(i, k)] += v;
            }
        }
        x
    }

    /// `(R, Qᵀy)` with `X = QR`, accumulated over blocks of rows so that only
    /// `O(K²)` memory is used. `R` has the singular values of `X`, and
    /// least-squares problems in `R` and `X` share their minimizers.
    pub fn triangular_factor(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.columns;
        let block = k.max(256);
        let mut r = DMatrix::<f64>::zeros(0, k);
        let mut z = DVector::<f64>::zeros(0);
        for start in (0..self.rows.len()).step_by(block) {
            let end = (start + block).min(self.rows.len());
            let top = r.nrows();
            let mut m = DMatrix::<f64>::zeros(top + end - start, k);
            let mut rhs = DVector::<f64>::zeros(top + end - start);
            m.rows_mut(0, top).copy_from(&r);
            rhs.rows_mut(0, top).copy_from(&z);
            for (i, row) in self.rows[start..end].iter().enumerate() {
                for &(c, v) in row {
                    m[(top + i, c)] += v;
                }
                rhs[top + i] = self.responses[start + i];
            }
            let qr = m.qr();
            z = qr.q().transpose() * rhs;
            r = qr.r();
        }
        (r, z)
    }

    /// `(XᵀX, Xᵀy)`.
    pub fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.columns;
        let mut g = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for (row, y) in self.rows.iter().zip(&self.responses) {
            for &(i, vi) in row {
                b[i] += vi * y;
                for &(j, vj) in row {
                    g[(i, j)] += vi * vj;
                }
            }
        }
        (g, b)
    }

    pub fn rss(&self, c: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.responses)
            .map(|(row, y)| {
                let fit: f64 = row.iter().map(|&(k, v)| v * c[k]).sum();
                (y - fit) * (y - fit)
            })
            .sum()
    }

    /// Minimal-norm least-squares solution with its numerical rank.
    ///
    /// Well-conditioned problems, where the minimizer is unique, are solved
    /// from the normal equations. Otherwise the design is reduced to its
    /// triangular factor, which is factorized by SVD,
    /// and singular values below `1e-10` times the largest are discarded.
    pub fn solve_min_norm(&self) -> Result<(Vec<f64>, usize, SolveMethod)> {
        let k = self.columns;
        if k > MAX_DENSE_COLUMNS {
            return Err(Error::Config(format!(
                "basis of {k} functions exceeds the dense solver limit of {MAX_DENSE_COLUMNS}; use a larger delta or a coarser level"
            )));
        }
        let (g, b) = self.normal_equations();
        let eig = SymmetricEigen::new(g);
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let (c, rank, method) = if lmax > 0.0 && lmin > NORMAL_EQ_MIN_RATIO * lmax {
            let vtb = eig.eigenvectors.transpose() * &b;
            let scaled = DVector::from_iterator(k, vtb.iter().zip(eig.eigenvalues.iter()).map(|(v, l)| v / l));
            (eig.eigenvectors * scaled, k, SolveMethod::NormalEquations)
        } else {
            let (r, y) = self.triangular_factor();
            let svd = r.svd(true, true);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let eps = RANK_TOL * smax;
            let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
            let c = if smax == 0.0 {
                DVector::zeros(k)
            } else {
                svd.solve(&y, eps).map_err(|e| Error::Numerical(e.to_string()))?.column(0).into_owned()
            };
            (c, rank, SolveMethod::Svd)
        };
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite least-squares coefficients".into()));
        }
        Ok((c.iter().cloned().collect(), rank, method))
    }
}

/// Least-squares problem `min_c Σ_i ((Y_i - 1) 1_{A_i} - Σ_k c_k ψ_k(X_{i-1}) 1_{A_i})^2`
/// with `A_i = {X_{(i-1)D} ∈ O_0^δ}`.
///
/// Only active rows are stored: inactive rows are identically zero in both the
/// design and the response and do not affect the minimizer.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    pub basis: Arc<BasisSpec>,
    /// Total number of increments `N`.
    pub n: usize,
    pub system: SparseSystem,
}

impl RegressionProblem {
    pub fn active_rows(&self) -> usize {
        self.system.rows.len()
    }

    pub fn rss(&self, c: &[f64]) -> f64 {
        self.system.rss(c)
    }
}

pub fn build_regression(obs: &ObservationSet, basis: &Arc<BasisSpec>) -> Result<RegressionProblem> {
    if obs.dim != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: obs.dim });
    }
    let region = &basis.regions.o0_delta;
    let y = obs.increments_y();
    let pairs: Vec<(SparseRow, f64)> = (0..obs.n())
        .into_par_iter()
        .filter_map(|i| {
            let x = obs.point(i);
            if !region.contains(x) {
                return None;
            }
            let mut row = Vec::new();
            basis.eval_row(x, &mut row);
            Some((row, y[i] - 1.0))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoActiveRows);
    }
    let (rows, responses) = pairs.into_iter().unzip();
    Ok(RegressionProblem { basis: basis.clone(), n: obs.n(), system: SparseSystem { columns: basis.len(), rows, responses } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Eigendecomposition of a well-conditioned `XᵀX`.
    NormalEquations,
    /// Singular value decomposition of the active design.
    Svd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverReport {
    pub rank: usize,
    pub residual_norm: f64,
    pub active_rows: usize,
    pub n: usize,
    pub method: SolveMethod,
}

pub fn solve_lsq(problem: &RegressionProblem) -> Result<(CoeffVector, SolverReport)> {
    let (values, rank, method) = problem.system.solve_min_norm()?;
    let residual_norm = problem.rss(&values).sqrt();
    let coeffs = CoeffVector::new(problem.basis.clone(), values)?;
    Ok((coeffs, SolverReport { rank, residual_norm, active_rows: problem.active_rows(), n: problem.n, method }))
}

#[derive(Clone, Debug)]
pub struct EstimatorOutput {
    pub coeffs: CoeffVector,
    /// `1 + ĝ`.
    pub f_hat: DiffusivityField,
    /// `min(f̂, M)_+`.
    pub f_hat_star: DiffusivityField,
    pub truncation: f64,
    pub report: SolverReport,
}

pub fn estimate_f(obs: &ObservationSet, basis: &Arc<BasisSpec>, truncation: f64) -> Result<EstimatorOutput> {
    if !(truncation > 0.0) {
        return Err(Error::Config(format!("truncation level must be positive, got {truncation}")));
    }
    let problem = build_regression(obs, basis)?;
    let (coeffs, report) = solve_lsq(&problem)?;
    let f_hat = DiffusivityField::direct(ScalarField::Expansion { offset: 1.0, coeffs: coeffs.clone() }, 0.0);
    let f_hat_star = f_hat.clone().truncated(0.0, truncation);
    Ok(EstimatorOutput { coeffs, f_hat, f_hat_star, truncation, report })
}

/// `sqrt((1/N) Σ g(X_{(i-1)D})^2 1_{A_i})`.
pub fn empirical_norm(obs: &ObservationSet, g: impl Fn(&[f64]) -> f64, regions: &NestedRegions) -> f64 {
    let n = obs.n();
    let s: f64 = (0..n)
        .map(|i| obs.point(i))
        .filter(|x| regions.o0_delta.contains(x))
        .map(|x| g(x).powi(2))
        .sum();
    (s / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnReport {
    pub holds: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Largest `|λ - 1|` over the spectrum.
    pub worst_deviation: f64,
}

/// Whether `(1-κ)‖g‖² ≤ |g|_N² ≤ (1+κ)‖g‖²` on `V_J`.
///
/// The basis is orthonormal in `L2(O)`, so this is the statement that the
/// eigenvalues of `vol(O) (1/N) Σ ψ(X_{i-1}) ψ(X_{i-1})ᵀ 1_{A_i}` lie in
/// `[1-κ, 1+κ]`. The volume factor converts the uniform invariant law to
/// Lebesgue measure.
pub fn check_bn(obs: &ObservationSet, basis: &Arc<BasisSpec>, kappa: f64) -> Result<BnReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Config(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let k = basis.len();
    let scale = basis.regions.domain.volume() / obs.n() as f64;
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut row = Vec::new();
    for i in 0..obs.n() {
        let x = obs.point(i);
        if !basis.regions.o0_delta.contains(x) {
            continue;
        }
        basis.eval_row(x, &mut row);
        for &(a, va) in &row {
            for &(b, vb) in &row {
                g[(a, b)] += scale * va * vb;
            }
        }
    }
    let ev = g.symmetric_eigenvalues();
    let min_eigenvalue = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst_deviation = (1.0 - min_eigenvalue).max(max_eigenvalue - 1.0);
    Ok(BnReport { holds: worst_deviation <= kappa, min_eigenvalue, max_eigenvalue, worst_deviation })
}

/// Cells per axis for L2 quadrature at level `j`: `2^{j+4}` per unit length.
pub fn quadrature_cells(domain: &Shape, j: u32) -> usize {
    let (lo, hi) = domain.bounding_box();
    let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    ((side * (1u64 << (j + 4)) as f64).ceil() as usize).max(1)
}

pub fn l2_error(f_hat: &DiffusivityField, f0: &DiffusivityField, domain: &Shape, j: u32) -> f64 {
    l2_distance(f_hat, f0, domain, quadrature_cells(domain, j))
}

/// Rejection indicator `‖f̂ - f_0‖_2 ≥ M̃ ξ_N`; the rejection region is closed.
pub fn plug_in_test(f_hat: &DiffusivityField, f0: &DiffusivityField, m_tilde: f64, xi: f64, domain: &Shape, j: u32) -> bool {
    l2_error(f_hat, f0, domain, j) >= m_tilde * xi
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelChoice {
    pub j: u32,
    /// `(J, RSS/N + c dim/N)` for every candidate.
    pub criteria: Vec<(u32, f64)>,
    pub penalty: f64,
}

/// Chooses `J` in `j_range` minimizing `RSS/N + c dim(V_J)/N`, with `c`
/// defaulting to twice the sample variance of the `Y_i`.
pub fn select_level(
    obs: &ObservationSet,
    family: &Arc<WaveletFamily>,
    regions: &NestedRegions,
    j0: u32,
    j_range: std::ops::RangeInclusive<u32>,
    penalty: Option<f64>,
) -> Result<LevelChoice> {
    let c = penalty.unwrap_or_else(|| 2.0 * crate::stats::variance(&obs.increments_y()));
    let n = obs.n() as f64;
    let mut criteria = Vec::new();
    for j in j_range {
        let basis = Arc::new(BasisSpec::new(family.clone(), regions.clone(), j0, j)?);
        let problem = build_regression(obs, &basis)?;
        let (coeffs, _) = solve_lsq(&problem)?;
        criteria.push((j, problem.rss(&coeffs.values) / n + c * basis.len() as f64 / n));
    }
    let j = criteria
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
        .ok_or_else(|| Error::Config("empty level range".into()))?;
    Ok(LevelChoice { j, criteria, penalty: c })
}
