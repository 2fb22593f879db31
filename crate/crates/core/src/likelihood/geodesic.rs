//! Geodesic distance of the conformal metric `g = f^{-1} I`.

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::dist2;
use crate::model::DiffusivityField;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSolverSpec {
    /// Number of path segments `n`; the knots are `t = j/n`.
    pub path_points: usize,
    pub max_iters: usize,
    /// Initial step of the backtracking line search.
    pub step: f64,
    /// Stop when the predicted energy decrease is below `tol * E`.
    pub tol: f64,
}

impl Default for GeodesicSolverSpec {
    fn default() -> Self {
        Self { path_points: 64, max_iters: 5000, step: 1.0, tol: 1e-14 }
    }
}

/// Discrete path energy `n Σ_j |γ_{j+1} - γ_j|² / f(γ_{j+1/2})`.
fn energy(f: &DiffusivityField, path: &[f64], d: usize, mid: &mut [f64]) -> f64 {
    let n = path.len() / d - 1;
    let mut e = 0.0;
    for j in 0..n {
        let a = &path[j * d..(j + 1) * d];
        let b = &path[(j + 1) * d..(j + 2) * d];
        for i in 0..d {
            mid[i] = 0.5 * (a[i] + b[i]);
        }
        e += dist2(a, b) / f.value(mid);
    }
    e * n as f64
}

/// Minimizes the discrete energy over interior knots and returns its square
/// root, the length of the constant-speed minimizer.
///
/// Descent directions are preconditioned with the tridiagonal Hessian of the
/// energy with the metric frozen at the current midpoints.
pub fn geodesic_distance(f: &DiffusivityField, x: &[f64], y: &[f64], spec: &GeodesicSolverSpec) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    let n = spec.path_points;
    if n < 2 || spec.max_iters == 0 || !(spec.step > 0.0) || !(spec.tol > 0.0) {
        return Err(Error::Config("geodesic solver needs n >= 2 and positive step, tolerance and iteration count".into()));
    }
    let d = x.len();
    if dist2(x, y) == 0.0 {
        return Ok(0.0);
    }
    let mut path = vec![0.0; (n + 1) * d];
    for j in 0..=n {
        let t = j as f64 / n as f64;
        for i in 0..d {
            path[j * d + i] = x[i] + t * (y[i] - x[i]);
        }
    }
    let nf = n as f64;
    let mut mid = vec![0.0; d];
    let mut grad_f = vec![0.0; d];
    let mut g = vec![0.0; n];
    let mut grad_g = vec![0.0; n * d];
    let mut sq = vec![0.0; n];
    let mut grad = vec![0.0; (n - 1) * d];
    let mut dir = vec![0.0; (n - 1) * d];
    let mut trial = path.clone();
    let mut e = energy(f, &path, d, &mut mid);
    let mut decrement = f64::INFINITY;
    for _ in 0..spec.max_iters {
        for j in 0..n {
            let a = &path[j * d..(j + 1) * d];
            let b = &path[(j + 1) * d..(j + 2) * d];
            for i in 0..d {
                mid[i] = 0.5 * (a[i] + b[i]);
            }
            let fm = f.value(&mid);
            f.gradient(&mid, &mut grad_f);
            g[j] = 1.0 / fm;
            for i in 0..d {
                grad_g[j * d + i] = -grad_f[i] / (fm * fm);
            }
            sq[j] = dist2(a, b);
        }
        // Knot k (1..n-1) touches segments k-1 and k.
        for k in 1..n {
            for i in 0..d {
                let dl = path[k * d + i] - path[(k - 1) * d + i];
                let dr = path[(k + 1) * d + i] - path[k * d + i];
                grad[(k - 1) * d + i] = nf
                    * (2.0 * dl * g[k - 1] - 2.0 * dr * g[k]
                        + 0.5 * sq[k - 1] * grad_g[(k - 1) * d + i]
                        + 0.5 * sq[k] * grad_g[k * d + i]);
            }
        }
        // Tridiagonal solve per coordinate: diag 2n(g_{k-1}+g_k), offdiag -2n g_k.
        let m = n - 1;
        let mut c = vec![0.0; m];
        let mut r = vec![0.0; m];
        for i in 0..d {
            for k in 0..m {
                let diag = 2.0 * nf * (g[k] + g[k + 1]);
                let lower = if k > 0 { -2.0 * nf * g[k] } else { 0.0 };
                let upper = -2.0 * nf * g[k + 1];
                let denom = diag - lower * if k > 0 { c[k - 1] } else { 0.0 };
                c[k] = upper / denom;
                r[k] = (grad[k * d + i] - lower * if k > 0 { r[k - 1] } else { 0.0 }) / denom;
            }
            for k in (0..m).rev() {
                let next = if k + 1 < m { dir[(k + 1) * d + i] } else { 0.0 };
                dir[k * d + i] = r[k] - c[k] * next;
            }
        }
        decrement = grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        if decrement * 0.5 <= spec.tol * e {
            return Ok(e.sqrt());
        }
        let mut t = spec.step;
        loop {
            trial.copy_from_slice(&path);
            for (k, v) in dir.iter().enumerate() {
                trial[d + k] -= t * v;
            }
            let et = energy(f, &trial, d, &mut mid);
            if et <= e - 1e-4 * t * decrement {
                std::mem::swap(&mut path, &mut trial);
                e = et;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                // No further progress at machine precision.
                if decrement <= 1e3 * spec.tol * e {
                    return Ok(e.sqrt());
                }
                return Err(Error::NonConvergence(decrement));
            }
        }
    }
    Err(Error::NonConvergence(decrement))
}

/// `|y - x|²/f(x) + ½ |y - x|² ∇(1/f)(x)·(y - x)`.
pub fn geodesic_expansion(f: &DiffusivityField, x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    let fx = f.value(x);
    let mut grad = vec![0.0; x.len()];
    f.gradient(x, &mut grad);
    let r2 = dist2(x, y);
    let cubic: f64 = grad.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| -g / (fx * fx) * (b - a)).sum();
    Ok(r2 / fx + 0.5 * r2 * cubic)
}

/// Lattice used by [`dijkstra_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Cells between `x` and `y` along each axis.
    pub inner_cells: usize,
    /// Extra cells beyond `x` and `y` on each side.
    pub margin: usize,
    /// Largest stencil offset per axis (d = 2 uses all primitive offsets).
    pub radius: i64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { inner_cells: 99, margin: 50, radius: 10 }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Shortest path on a lattice containing `x` and `y` as nodes, with edge
/// weights `|Δ| / sqrt(f(midpoint))`. Supports d = 1 and d = 2.
pub fn dijkstra_distance(f: &DiffusivityField, x: &[f64], y: &[f64], lattice: &LatticeSpec) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    let d = x.len();
    if d == 0 || d > 2 {
        return Err(Error::Config(format!("lattice oracle supports d = 1 or 2, got {d}")));
    }
    if lattice.inner_cells == 0 || lattice.radius < 1 {
        return Err(Error::Config("lattice needs at least one inner cell and radius 1".into()));
    }
    let dist = dist2(x, y).sqrt();
    if dist == 0.0 {
        return Ok(0.0);
    }
    let inner = lattice.inner_cells as f64;
    let side = lattice.inner_cells + 2 * lattice.margin + 1;
    let step: Vec<f64> = (0..d)
        .map(|i| {
            let delta = y[i] - x[i];
            if delta.abs() < 1e-12 * dist {
                dist / inner
            } else {
                delta / inner
            }
        })
        .collect();
    let coord = |idx: &[i64], out: &mut [f64]| {
        for i in 0..d {
            out[i] = x[i] + (idx[i] - lattice.margin as i64) as f64 * step[i];
        }
    };
    let offsets: Vec<Vec<i64>> = if d == 1 {
        vec![vec![1], vec![-1]]
    } else {
        let r = lattice.radius;
        let mut v = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                if (a, b) != (0, 0) && gcd(a, b) == 1 {
                    v.push(vec![a, b]);
                }
            }
        }
        v
    };
    let total = side.pow(d as u32);
    let unflat = |mut lin: usize, idx: &mut [i64]| {
        for i in (0..d).rev() {
            idx[i] = (lin % side) as i64;
            lin /= side;
        }
    };
    let flat = |idx: &[i64]| idx.iter().fold(0usize, |acc, &v| acc * side + v as usize);
    let source = flat(&vec![lattice.margin as i64; d]);
    let target_idx: Vec<i64> = (0..d)
        .map(|i| {
            let degenerate = (y[i] - x[i]).abs() < 1e-12 * dist;
            (lattice.margin + if degenerate { 0 } else { lattice.inner_cells }) as i64
        })
        .collect();
    let target = flat(&target_idx);
    let mut best = vec![f64::INFINITY; total];
    let mut heap = BinaryHeap::new();
    best[source] = 0.0;
    heap.push(Entry(0.0, source));
    let (mut idx, mut nidx) = (vec![0i64; d], vec![0i64; d]);
    let (mut p, mut q, mut mid) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    while let Some(Entry(cost, node)) = heap.pop() {
        if node == target {
            return Ok(cost);
        }
        if cost > best[node] {
            continue;
        }
        unflat(node, &mut idx);
        coord(&idx, &mut p);
        'edges: for off in &offsets {
            for i in 0..d {
                nidx[i] = idx[i] + off[i];
                if nidx[i] < 0 || nidx[i] >= side as i64 {
                    continue 'edges;
                }
            }
            coord(&nidx, &mut q);
            for i in 0..d {
                mid[i] = 0.5 * (p[i] + q[i]);
            }
            let c = cost + dist2(&p, &q).sqrt() / f.value(&mid).sqrt();
            let nb = flat(&nidx);
            if c < best[nb] {
                best[nb] = c;
                heap.push(Entry(c, nb));
            }
        }
    }
    Err(Error::Numerical("target unreachable on the lattice".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bump;

    fn bumped(d: usize) -> DiffusivityField {
        DiffusivityField::bumps(1.0, vec![Bump { center: vec![0.5; d], radius: 0.2, amplitude: 0.5 }])
    }

    #[test]
    fn euclidean_and_constant_metrics() {
        let spec = GeodesicSolverSpec::default();
        let (x, y) = ([0.2, 0.3], [0.6, 0.5]);
        let e = dist2(&x, &y).sqrt();
        let l1 = geodesic_distance(&DiffusivityField::constant(1.0), &x, &y, &spec).unwrap();
        assert!((l1 - e).abs() < 1e-6);
        let l4 = geodesic_distance(&DiffusivityField::constant(4.0), &x, &y, &spec).unwrap();
        assert!((l4 - e / 2.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_distance_is_the_line_integral() {
        let f = bumped(1);
        let l = geodesic_distance(&f, &[0.35], &[0.6], &GeodesicSolverSpec::default()).unwrap();
        let exact = crate::quadrature::integrate(|t| 1.0 / f.value(&[t]).sqrt(), 0.35, 0.6, 1e-14, 1e-13);
        assert!((l - exact).abs() < 1e-5, "{l} vs {exact}");
    }

    #[test]
    fn symmetric_and_triangular() {
        let f = bumped(2);
        let spec = GeodesicSolverSpec::default();
        let (a, b, c) = ([0.4, 0.45], [0.58, 0.52], [0.5, 0.62]);
        let ab = geodesic_distance(&f, &a, &b, &spec).unwrap();
        let ba = geodesic_distance(&f, &b, &a, &spec).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        let ac = geodesic_distance(&f, &a, &c, &spec).unwrap();
        let bc = geodesic_distance(&f, &b, &c, &spec).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn expansion_at_critical_point_and_flat_metric() {
        let f = bumped(2);
        let x = [0.5, 0.5];
        let y = [0.53, 0.47];
        let v = geodesic_expansion(&f, &x, &y).unwrap();
        assert!((v - dist2(&x, &y) / 1.5).abs() < 1e-15);
        let one = DiffusivityField::constant(1.0);
        assert_eq!(geodesic_expansion(&one, &x, &y).unwrap(), dist2(&x, &y));
    }

    #[test]
    fn dijkstra_agrees_in_one_dimension() {
        let f = bumped(1);
        let l = dijkstra_distance(&f, &[0.35], &[0.6], &LatticeSpec::default()).unwrap();
        let exact = crate::quadrature::integrate(|t| 1.0 / f.value(&[t]).sqrt(), 0.35, 0.6, 1e-14, 1e-13);
        assert!((l - exact).abs() < 1e-5);
    }
}
