//! Diffusivity fields: analytic truths, lattice values, wavelet expansions and
//! link-composed fields `Φ(χ W)`.

use super::{link_phi, DEFAULT_F_MIN};
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{NestedRegions, Shape};
use crate::wavelet::{CoeffVector, WaveletFamily};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Radial bump `amplitude * exp(1 - 1/(1 - t^2))`, `t = |x - center| / radius`,
/// with peak value `amplitude` and support the closed ball of `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    fn t2(&self, x: &[f64]) -> f64 {
        crate::geometry::dist2(x, &self.center) / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let t2 = self.t2(x);
        if t2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - t2)).exp()
        }
    }

    fn add_gradient(&self, x: &[f64], out: &mut [f64]) {
        let t2 = self.t2(x);
        if t2 >= 1.0 {
            return;
        }
        let u = 1.0 - t2;
        let b = self.amplitude * (1.0 - 1.0 / u).exp();
        // d/dx_i of 1 - 1/(1 - t^2) = -2 (x_i - c_i) / (r^2 u^2)
        let k = -2.0 * b / (self.radius * self.radius * u * u);
        for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&self.center)) {
            *o += k * (xi - ci);
        }
    }
}

/// Values on a regular lattice with multilinear interpolation.
///
/// Nodes are `lower_i + k (upper_i - lower_i)/(n_i - 1)`; values are stored with
/// the last axis varying fastest. Points outside are clamped to the lattice box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        ensure_dim(lower.len(), upper.len())?;
        ensure_dim(lower.len(), counts.len())?;
        ensure_dim(counts.iter().product(), values.len())?;
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::Config("grid needs at least two nodes per axis".into()));
        }
        Ok(Self { lower, upper, counts, values })
    }

    /// Lattice nodes in storage order.
    pub fn nodes(lower: &[f64], upper: &[f64], counts: &[usize]) -> Vec<Vec<f64>> {
        let total: usize = counts.iter().product();
        (0..total)
            .map(|mut lin| {
                let mut x = vec![0.0; counts.len()];
                for ax in (0..counts.len()).rev() {
                    let k = lin % counts[ax];
                    lin /= counts[ax];
                    x[ax] = lower[ax] + (upper[ax] - lower[ax]) * k as f64 / (counts[ax] - 1) as f64;
                }
                x
            })
            .collect()
    }

    /// Interpolation weights as `(node, weight)` pairs.
    pub fn weights(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 1.0));
        for ax in 0..self.counts.len() {
            let n = self.counts[ax];
            let h = (self.upper[ax] - self.lower[ax]) / (n - 1) as f64;
            let t = ((x[ax] - self.lower[ax]) / h).clamp(0.0, (n - 1) as f64);
            let k = (t.floor() as usize).min(n - 2);
            let w = t - k as f64;
            let len = out.len();
            for j in 0..len {
                let (idx, v) = out[j];
                out[j] = (idx * n + k, v * (1.0 - w));
                out.push((idx * n + k + 1, v * w));
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut w = Vec::with_capacity(1 << x.len());
        self.weights(x, &mut w);
        w.iter().map(|&(i, v)| v * self.values[i]).sum()
    }
}

/// A real-valued function on the domain, used both as a diffusivity and as
/// the pre-link field `W`.
#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    /// `base + sum of bumps`.
    Bumps { base: f64, bumps: Vec<Bump> },
    Grid(GridField),
    /// `offset + sum_k c_k psi_k` in an interior wavelet basis.
    Expansion { offset: f64, coeffs: CoeffVector },
    /// `offset + sum c_r prod_i 2^{l/2} psi(2^l x_i - r_i)` over a sparse set of
    /// pure-wavelet translations at a single level.
    WaveletTerms { family: Arc<WaveletFamily>, level: u32, offset: f64, terms: HashMap<Vec<i64>, f64> },
    Scaled(Box<ScalarField>, f64),
}

impl ScalarField {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Bumps { base, bumps } => base + bumps.iter().map(|b| b.value(x)).sum::<f64>(),
            ScalarField::Grid(g) => g.value(x),
            ScalarField::Expansion { offset, coeffs } => offset + coeffs.evaluate(x),
            ScalarField::WaveletTerms { family, level, offset, terms } => {
                offset + wavelet_terms_value(family, *level, terms, x)
            }
            ScalarField::Scaled(inner, k) => k * inner.value(x),
        }
    }

    /// Analytic gradient when available.
    fn gradient_exact(&self, x: &[f64], out: &mut [f64]) -> bool {
        match self {
            ScalarField::Constant(_) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                true
            }
            ScalarField::Bumps { bumps, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                bumps.iter().for_each(|b| b.add_gradient(x, out));
                true
            }
            ScalarField::Scaled(inner, k) => {
                let ok = inner.gradient_exact(x, out);
                out.iter_mut().for_each(|v| *v *= k);
                ok
            }
            _ => false,
        }
    }
}

fn wavelet_terms_value(family: &WaveletFamily, level: u32, terms: &HashMap<Vec<i64>, f64>, x: &[f64]) -> f64 {
    let s = (1u64 << level) as f64;
    let l = family.support_len() as i64;
    let amp = s.sqrt();
    let d = x.len();
    let ranges: Vec<(i64, i64)> = x
        .iter()
        .map(|&xi| {
            let t = s * xi;
            ((t - l as f64).floor() as i64 + 1, t.ceil() as i64 - 1)
        })
        .collect();
    let mut total = 0.0;
    let mut r: Vec<i64> = ranges.iter().map(|p| p.0).collect();
    if ranges.iter().any(|p| p.0 > p.1) {
        return 0.0;
    }
    loop {
        if let Some(c) = terms.get(&r) {
            let v: f64 = (0..d).map(|i| amp * family.psi(s * x[i] - r[i] as f64)).product();
            total += c * v;
        }
        let mut ax = d;
        loop {
            if ax == 0 {
                return total;
            }
            ax -= 1;
            r[ax] += 1;
            if r[ax] <= ranges[ax].1 {
                break;
            }
            r[ax] = ranges[ax].0;
        }
    }
}

/// Smooth cutoff equal to one on `K` and zero off `O_0`.
///
/// Built from the degree-7 smoothstep `t^4 (35 - 84t + 70t^2 - 20t^3)`, which
/// is `C^3` at both ends. For a box it is the product of one-dimensional
/// steps in each coordinate's distance to the faces; for a ball it is the step
/// of the radial inset distance.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    pub regions: NestedRegions,
}

#[inline]
pub fn smoothstep7(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
    }
}

#[inline]
pub fn smoothstep7_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        140.0 * (t * (1.0 - t)).powi(3)
    }
}

impl Cutoff {
    pub fn new(regions: NestedRegions) -> Self {
        Self { regions }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let delta = self.regions.delta;
        match &self.regions.domain {
            Shape::Hyperrectangle { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (a, b))| smoothstep7(((v - a).min(b - v) - 2.0 * delta) / delta))
                .product(),
            shape @ Shape::Ball { .. } => smoothstep7((shape.inset_distance(x) - 2.0 * delta) / delta),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let delta = self.regions.delta;
        match &self.regions.domain {
            Shape::Hyperrectangle { lower, upper } => {
                let d = x.len();
                let mut vals = vec![0.0; d];
                let mut ders = vec![0.0; d];
                for i in 0..d {
                    let (lo_side, dist) = if x[i] - lower[i] <= upper[i] - x[i] {
                        (true, x[i] - lower[i])
                    } else {
                        (false, upper[i] - x[i])
                    };
                    let t = (dist - 2.0 * delta) / delta;
                    vals[i] = smoothstep7(t);
                    ders[i] = smoothstep7_derivative(t) / delta * if lo_side { 1.0 } else { -1.0 };
                }
                for i in 0..d {
                    out[i] = ders[i] * (0..d).filter(|&j| j != i).map(|j| vals[j]).product::<f64>();
                }
            }
            Shape::Ball { center, .. } => {
                let r = crate::geometry::dist2(x, center).sqrt();
                let t = (self.regions.domain.inset_distance(x) - 2.0 * delta) / delta;
                let k = -smoothstep7_derivative(t) / delta;
                for i in 0..x.len() {
                    out[i] = if r > 0.0 { k * (x[i] - center[i]) / r } else { 0.0 };
                }
            }
        }
    }

    /// Upper bound on the Lipschitz constant: `sqrt(d) 35/16 / δ` for boxes,
    /// `35/16 / δ` for balls.
    pub fn lipschitz_bound(&self) -> f64 {
        let peak = 35.0 / 16.0 / self.regions.delta;
        match self.regions.domain {
            Shape::Hyperrectangle { .. } => (self.regions.dim() as f64).sqrt() * peak,
            Shape::Ball { .. } => peak,
        }
    }
}

#[derive(Clone, Debug)]
pub enum FieldRepr {
    Direct(ScalarField),
    /// `Φ(χ(x) W(x))`.
    Linked { w: ScalarField, cutoff: Cutoff },
    /// `min(max(inner, lo), hi)`.
    Truncated { inner: Box<DiffusivityField>, lo: f64, hi: f64 },
}

/// A scalar diffusivity on the closure of the domain.
#[derive(Clone, Debug)]
pub struct DiffusivityField {
    pub repr: FieldRepr,
    pub f_min: f64,
}

const FD_STEPS: [f64; 5] = [0.0, 1e-5, 1e-4, 1e-3, 2e-3];

impl DiffusivityField {
    pub fn constant(c: f64) -> Self {
        Self { repr: FieldRepr::Direct(ScalarField::Constant(c)), f_min: DEFAULT_F_MIN.min(c) }
    }

    pub fn bumps(base: f64, bumps: Vec<Bump>) -> Self {
        Self { repr: FieldRepr::Direct(ScalarField::Bumps { base, bumps }), f_min: DEFAULT_F_MIN }
    }

    pub fn direct(field: ScalarField, f_min: f64) -> Self {
        Self { repr: FieldRepr::Direct(field), f_min }
    }

    /// `Φ(χ W)` with `Φ(x) = f_min + (1 - f_min) e^x`.
    pub fn compose(w: ScalarField, cutoff: Cutoff, f_min: f64) -> Self {
        Self { repr: FieldRepr::Linked { w, cutoff }, f_min }
    }

    pub fn truncated(self, lo: f64, hi: f64) -> Self {
        let f_min = self.f_min.max(lo);
        Self { repr: FieldRepr::Truncated { inner: Box::new(self), lo, hi }, f_min }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.repr {
            FieldRepr::Direct(s) => s.value(x),
            FieldRepr::Linked { w, cutoff } => {
                let c = cutoff.value(x);
                if c == 0.0 {
                    1.0
                } else {
                    link_phi(c * w.value(x), self.f_min)
                }
            }
            FieldRepr::Truncated { inner, lo, hi } => inner.value(x).clamp(*lo, *hi),
        }
    }

    /// Gradient, analytic for closed-form fields and central differences otherwise.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        if let FieldRepr::Direct(s) = &self.repr {
            if s.gradient_exact(x, out) {
                return;
            }
        }
        let h = FD_STEPS[1];
        let mut y = x.to_vec();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = self.value(&y);
            y[i] = x[i] - h;
            let fm = self.value(&y);
            y[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// Mixed partial derivative `∂^alpha f(x)` for `|alpha| <= 4`, by nested
    /// central differences (the first order uses the analytic gradient when
    /// available).
    pub fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        ensure_dim(x.len(), alpha.len())?;
        let order: usize = alpha.iter().sum();
        if order > 4 {
            return Err(Error::Config(format!("derivative order {order} above 4")));
        }
        if order == 0 {
            return Ok(self.value(x));
        }
        if order == 1 {
            let mut g = vec![0.0; x.len()];
            self.gradient(x, &mut g);
            return Ok(g[alpha.iter().position(|&a| a == 1).unwrap()]);
        }
        let h = FD_STEPS[order];
        let mut steps = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            steps.extend(std::iter::repeat(i).take(a));
        }
        // Sum over the 2^order sign patterns of the nested central difference.
        let mut total = 0.0;
        let mut y = x.to_vec();
        for mask in 0..(1u32 << order) {
            y.copy_from_slice(x);
            let mut sign = 1.0;
            for (k, &ax) in steps.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    y[ax] -= h;
                    sign = -sign;
                } else {
                    y[ax] += h;
                }
            }
            total += sign * self.value(&y);
        }
        Ok(total / (2.0 * h).powi(order as i32))
    }

    /// Errors if the field drops below `f_min` at any of the given points.
    pub fn check_lower_bound<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let min = points.into_iter().map(|x| self.value(x)).fold(f64::INFINITY, f64::min);
        if min < self.f_min {
            Err(Error::LowerBound { min, bound: self.f_min })
        } else {
            Ok(())
        }
    }

    /// Largest deviation from one over lattice points of the domain outside `region`.
    pub fn max_deviation_outside(&self, domain: &Shape, region: &Shape, per_axis: usize) -> f64 {
        let (lo, hi) = domain.bounding_box();
        let counts = vec![per_axis; lo.len()];
        GridField::nodes(&lo, &hi, &counts)
            .into_iter()
            .filter(|x| domain.contains(x) && region.inset_distance(x) <= 0.0)
            .map(|x| (self.value(&x) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Sequence-space smoothness proxy for expansion and linked fields; for
    /// other fields the largest absolute partial derivative up to order
    /// `min(floor(s), 4)` over a lattice of the domain.
    pub fn holder_surrogate(&self, s: f64, domain: &Shape, per_axis: usize) -> f64 {
        match &self.repr {
            FieldRepr::Direct(ScalarField::Expansion { coeffs, .. }) => coeffs.besov_norm(s),
            FieldRepr::Linked { w: ScalarField::Expansion { coeffs, .. }, .. } => coeffs.besov_norm(s),
            _ => {
                let (lo, hi) = domain.bounding_box();
                let d = lo.len();
                let kmax = (s.floor() as usize).min(4);
                let mut alphas = vec![vec![0usize; d]];
                for _ in 0..kmax {
                    let mut next = Vec::new();
                    for a in &alphas {
                        for i in 0..d {
                            let mut b = a.clone();
                            b[i] += 1;
                            if !next.contains(&b) {
                                next.push(b);
                            }
                        }
                    }
                    alphas.extend(next.clone());
                    alphas.sort();
                    alphas.dedup();
                }
                let nodes = GridField::nodes(&lo, &hi, &vec![per_axis; d]);
                let mut best = 0.0f64;
                for x in nodes.iter().filter(|x| domain.contains(x)) {
                    for a in &alphas {
                        best = best.max(self.partial(x, a).map(f64::abs).unwrap_or(0.0));
                    }
                }
                best
            }
        }
    }
}

/// `‖f - g‖_{L2(O)}` by the midpoint rule on `cells` cells per axis of the
/// domain's bounding box, counting cells whose midpoint lies in the domain.
pub fn l2_distance(f: &DiffusivityField, g: &DiffusivityField, domain: &Shape, cells: usize) -> f64 {
    let (lo, hi) = domain.bounding_box();
    let d = lo.len();
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a) / cells as f64).product();
    let total: usize = cells.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for mut lin in 0..total {
        for ax in (0..d).rev() {
            let k = lin % cells;
            lin /= cells;
            x[ax] = lo[ax] + (hi[ax] - lo[ax]) * (k as f64 + 0.5) / cells as f64;
        }
        if domain.contains(&x) {
            let e = f.value(&x) - g.value(&x);
            acc += e * e;
        }
    }
    (acc * vol).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regions(d: usize) -> NestedRegions {
        NestedRegions::new(Shape::unit_cube(d), 0.1).unwrap()
    }

    #[test]
    fn smoothstep_is_c3_at_the_ends() {
        // The derivative is 140 t^3 (1 - t)^3, so derivatives of order one to
        // three vanish at both ends.
        let h = 1e-6;
        for t in [0.1, 0.37, 0.5, 0.93] {
            let fd = (smoothstep7(t + h) - smoothstep7(t - h)) / (2.0 * h);
            assert!((fd - smoothstep7_derivative(t)).abs() < 1e-8);
        }
        for e in [1e-2, 1e-3] {
            assert!(smoothstep7_derivative(e) <= 140.0 * e.powi(3));
            assert!(smoothstep7_derivative(1.0 - e) <= 140.0 * e.powi(3));
            assert!(smoothstep7(e) <= 35.0 * e.powi(4) && 1.0 - smoothstep7(1.0 - e) <= 35.0 * e.powi(4));
        }
        assert_eq!(smoothstep7(0.5), 0.5);
        assert_eq!(smoothstep7(0.0), 0.0);
        assert_eq!(smoothstep7(1.0), 1.0);
    }

    #[test]
    fn cutoff_levels() {
        let c = Cutoff::new(regions(2));
        assert_eq!(c.value(&[0.5, 0.5]), 1.0);
        assert_eq!(c.value(&[0.31, 0.69]), 1.0);
        assert_eq!(c.value(&[0.2, 0.5]), 0.0);
        assert_eq!(c.value(&[0.05, 0.5]), 0.0);
        let v = c.value(&[0.25, 0.5]);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn cutoff_gradient_matches_differences_and_bound() {
        for shape in [Shape::unit_cube(2), Shape::ball(vec![0.5, 0.5], 0.5).unwrap()] {
            let c = Cutoff::new(NestedRegions::new(shape, 0.1).unwrap());
            let mut g = [0.0; 2];
            for x in [[0.25, 0.27], [0.33, 0.74], [0.72, 0.5], [0.24, 0.24]] {
                c.gradient(&x, &mut g);
                let h = 1e-6;
                for i in 0..2 {
                    let mut p = x;
                    let mut m = x;
                    p[i] += h;
                    m[i] -= h;
                    let fd = (c.value(&p) - c.value(&m)) / (2.0 * h);
                    assert!((fd - g[i]).abs() < 1e-6, "{x:?} axis {i}");
                }
                assert!(g[0].hypot(g[1]) <= c.lipschitz_bound() + 1e-12);
            }
        }
    }

    #[test]
    fn composed_field_is_one_outside_and_bounded_below() {
        let r = regions(2);
        let w = ScalarField::Bumps { base: -3.0, bumps: vec![Bump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 5.0 }] };
        let f = DiffusivityField::compose(w.clone(), Cutoff::new(r.clone()), 0.25);
        assert_eq!(f.max_deviation_outside(&r.domain, &r.o0, 41), 0.0);
        let nodes = GridField::nodes(&[0.0, 0.0], &[1.0, 1.0], &[41, 41]);
        f.check_lower_bound(nodes.iter().map(|v| v.as_slice())).unwrap();
        let x = [0.45, 0.6];
        assert!((f.value(&x) - link_phi(w.value(&x), 0.25)).abs() < 1e-15);
        let zero = DiffusivityField::compose(ScalarField::Constant(0.0), Cutoff::new(r), 0.25);
        assert_eq!(zero.value(&x), 1.0);
    }

    #[test]
    fn bump_gradient_and_partials() {
        let f = DiffusivityField::bumps(1.0, vec![Bump { center: vec![0.5, 0.5], radius: 0.2, amplitude: 0.5 }]);
        let x = [0.55, 0.43];
        let mut g = [0.0; 2];
        f.gradient(&x, &mut g);
        let h = 1e-6;
        let d0 = (f.value(&[x[0] + h, x[1]]) - f.value(&[x[0] - h, x[1]])) / (2.0 * h);
        assert!((d0 - g[0]).abs() < 1e-7);
        // Second derivative against differences of the analytic gradient.
        let mut gp = [0.0; 2];
        let mut gm = [0.0; 2];
        f.gradient(&[x[0] + h, x[1]], &mut gp);
        f.gradient(&[x[0] - h, x[1]], &mut gm);
        let d00 = (gp[0] - gm[0]) / (2.0 * h);
        assert!((f.partial(&x, &[2, 0]).unwrap() - d00).abs() < 1e-3 * d00.abs().max(1.0));
        assert!(f.partial(&x, &[3, 2]).is_err());
    }

    #[test]
    fn grid_interpolation_is_exact_for_multilinear_functions() {
        let lower = vec![0.0, -1.0];
        let upper = vec![1.0, 1.0];
        let counts = vec![5, 9];
        let nodes = GridField::nodes(&lower, &upper, &counts);
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let g = GridField::new(lower, upper, counts, nodes.iter().map(|x| f(x)).collect()).unwrap();
        for x in [[0.13, 0.7], [0.99, -0.99], [0.5, 0.0]] {
            assert!((g.value(&x) - f(&x)).abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_and_l2_distance() {
        let dom = Shape::unit_cube(1);
        let f = DiffusivityField::direct(ScalarField::Grid(GridField::new(vec![0.0], vec![1.0], vec![2], vec![0.0, 3.0]).unwrap()), 0.0);
        let t = f.clone().truncated(0.0, 2.0);
        assert_eq!(t.value(&[0.9]), 2.0);
        let one = DiffusivityField::constant(1.0);
        // ∫_0^1 (3x - 1)^2 dx = 1
        assert!((l2_distance(&f, &one, &dom, 4096) - 1.0).abs() < 1e-6);
    }
}
