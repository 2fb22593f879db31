//! Tensor-product Daubechies bases restricted to the interior region.

use super::family::WaveletFamily;
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{NestedRegions, Shape};
use nalgebra::DMatrix;
use std::sync::Arc;

const NONE: u32 = u32::MAX;

/// One tensor basis function: level, per-axis kind (bit `i` set means the
/// wavelet on axis `i`, clear means the scaling function) and translation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorIndex {
    pub level: u32,
    pub pattern: u32,
    pub shift: Vec<i64>,
}

impl TensorIndex {
    /// Kind string with one letter per axis, `s` for scaling and `w` for wavelet.
    pub fn kind(&self, d: usize) -> String {
        (0..d).map(|i| if self.pattern >> i & 1 == 1 { 'w' } else { 's' }).collect()
    }

    pub fn parse_kind(kind: &str) -> Result<u32> {
        kind.chars().enumerate().try_fold(0u32, |acc, (i, c)| match c {
            's' => Ok(acc),
            'w' => Ok(acc | 1 << i),
            _ => Err(Error::Parse(format!("bad kind letter {c:?} in {kind:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
struct Block {
    level: u32,
    pattern: u32,
    lo: Vec<i64>,
    counts: Vec<usize>,
    /// Local linear index (last axis fastest) to column, or `NONE`.
    slots: Vec<u32>,
}

/// The span `V_J`: scaling functions at the coarse level `J0`, plus all mixed
/// and pure wavelet tensors at levels `J0..=J`, keeping every translation whose
/// support meets the interior of `O_0`.
#[derive(Clone, Debug)]
pub struct BasisSpec {
    pub family: Arc<WaveletFamily>,
    pub j0: u32,
    pub j: u32,
    pub regions: NestedRegions,
    indices: Vec<TensorIndex>,
    blocks: Vec<Block>,
}

/// Support rectangle of any function at `level` with translation `shift`.
pub fn support_rect(family: &WaveletFamily, level: u32, shift: &[i64]) -> (Vec<f64>, Vec<f64>) {
    let s = (1u64 << level) as f64;
    let l = family.support_len() as f64;
    (
        shift.iter().map(|&r| r as f64 / s).collect(),
        shift.iter().map(|&r| (r as f64 + l) / s).collect(),
    )
}

fn candidate_range(family: &WaveletFamily, level: u32, a: f64, b: f64) -> (i64, i64) {
    let s = (1u64 << level) as f64;
    let l = family.support_len() as f64;
    ((a * s - l).floor() as i64 + 1, (b * s).ceil() as i64 - 1)
}

fn for_each_shift(lo: &[i64], counts: &[usize], mut f: impl FnMut(&[i64])) {
    let d = lo.len();
    if counts.iter().any(|&c| c == 0) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        f(&cur);
        let mut ax = d;
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            cur[ax] += 1;
            if cur[ax] < lo[ax] + counts[ax] as i64 {
                break;
            }
            cur[ax] = lo[ax];
        }
    }
}

/// Translations at `level` whose support meets `O_0`, per axis bounds of the
/// bounding box.
fn level_candidates(family: &WaveletFamily, regions: &NestedRegions, level: u32) -> (Vec<i64>, Vec<usize>) {
    let (a, b) = regions.o0.bounding_box();
    let mut lo = Vec::with_capacity(a.len());
    let mut counts = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let (r0, r1) = candidate_range(family, level, a[i], b[i]);
        lo.push(r0);
        counts.push((r1 - r0 + 1).max(0) as usize);
    }
    (lo, counts)
}

/// Whether every support meeting `O_0` at this level lies inside `O_0^δ`.
pub fn level_is_feasible(family: &WaveletFamily, regions: &NestedRegions, level: u32) -> bool {
    let (lo, counts) = level_candidates(family, regions, level);
    let mut ok = true;
    for_each_shift(&lo, &counts, |r| {
        if !ok {
            return;
        }
        let (a, b) = support_rect(family, level, r);
        if regions.o0.rect_meets_interior(&a, &b) && !regions.o0_delta.contains_rect(&a, &b) {
            ok = false;
        }
    });
    ok
}

/// Level from which every support is short enough to be feasible regardless
/// of alignment: its diameter is at most the gap `δ/2` between the regions.
fn guaranteed_level(family: &WaveletFamily, regions: &NestedRegions) -> u32 {
    let diam = (regions.dim() as f64).sqrt() * family.support_len() as f64;
    let mut l = 0;
    while diam / (1u64 << l) as f64 > regions.delta / 2.0 {
        l += 1;
    }
    l
}

/// Smallest level `J0` such that at `J0` and every finer level no support meets
/// both `O_0` and the complement of `O_0^δ`.
///
/// Feasibility is not monotone at coarse levels because of dyadic alignment,
/// so the search runs downward from a level where it is guaranteed.
pub fn minimal_coarse_level(family: &WaveletFamily, regions: &NestedRegions) -> u32 {
    let mut l = guaranteed_level(family, regions);
    while l > 0 && level_is_feasible(family, regions, l - 1) {
        l -= 1;
    }
    l
}

impl BasisSpec {
    pub fn new(family: Arc<WaveletFamily>, regions: NestedRegions, j0: u32, j: u32) -> Result<Self> {
        if j < j0 {
            return Err(Error::Config(format!("fine level {j} below coarse level {j0}")));
        }
        if j > 24 {
            return Err(Error::Config(format!("fine level {j} is too large")));
        }
        let safe = guaranteed_level(&family, &regions);
        for level in j0..=j.min(safe) {
            if !level_is_feasible(&family, &regions, level) {
                return Err(Error::InfeasibleLevel { requested: j0, minimal: minimal_coarse_level(&family, &regions) });
            }
        }
        let d = regions.dim();
        let mut indices = Vec::new();
        let mut blocks = Vec::new();
        for level in j0..=j {
            let (lo, counts) = level_candidates(&family, &regions, level);
            let first_pattern = if level == j0 { 0 } else { 1 };
            for pattern in first_pattern..(1u32 << d) {
                let mut slots = Vec::with_capacity(counts.iter().product());
                for_each_shift(&lo, &counts, |r| {
                    let (a, b) = support_rect(&family, level, r);
                    if regions.o0.rect_meets_interior(&a, &b) {
                        slots.push(indices.len() as u32);
                        indices.push(TensorIndex { level, pattern, shift: r.to_vec() });
                    } else {
                        slots.push(NONE);
                    }
                });
                blocks.push(Block { level, pattern, lo: lo.clone(), counts: counts.clone(), slots });
            }
        }
        Ok(Self { family, j0, j, regions, indices, blocks })
    }

    /// Basis at the smallest feasible coarse level with `j = j0 + extra`.
    pub fn minimal(family: Arc<WaveletFamily>, regions: NestedRegions, extra: u32) -> Result<Self> {
        let j0 = minimal_coarse_level(&family, &regions);
        Self::new(family, regions, j0, j0 + extra)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.regions.dim()
    }

    pub fn indices(&self) -> &[TensorIndex] {
        &self.indices
    }

    pub fn position(&self, index: &TensorIndex) -> Option<usize> {
        let b = self.blocks.iter().find(|b| b.level == index.level && b.pattern == index.pattern)?;
        let mut lin = 0usize;
        for i in 0..b.lo.len() {
            let off = index.shift[i] - b.lo[i];
            if off < 0 || off as usize >= b.counts[i] {
                return None;
            }
            lin = lin * b.counts[i] + off as usize;
        }
        match b.slots[lin] {
            NONE => None,
            c => Some(c as usize),
        }
    }

    /// Value of basis function `k` at `x`.
    pub fn evaluate(&self, k: usize, x: &[f64]) -> f64 {
        let idx = &self.indices[k];
        let s = (1u64 << idx.level) as f64;
        let amp = s.sqrt();
        (0..x.len())
            .map(|i| amp * self.family.eval(idx.pattern >> i & 1 == 1, s * x[i] - idx.shift[i] as f64))
            .product()
    }

    /// All nonzero basis values at `x` as `(column, value)` pairs.
    pub fn eval_row(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let d = x.len();
        let l = self.family.support_len() as i64;
        let mut vals: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(l as usize); d];
        for b in &self.blocks {
            let s = (1u64 << b.level) as f64;
            let amp = s.sqrt();
            let mut empty = false;
            for i in 0..d {
                vals[i].clear();
                let t = s * x[i];
                let r_lo = ((t - l as f64).floor() as i64 + 1).max(b.lo[i]);
                let r_hi = ((t.ceil() as i64) - 1).min(b.lo[i] + b.counts[i] as i64 - 1);
                let w = b.pattern >> i & 1 == 1;
                for r in r_lo..=r_hi {
                    let v = amp * self.family.eval(w, t - r as f64);
                    if v != 0.0 {
                        vals[i].push(((r - b.lo[i]) as usize, v));
                    }
                }
                if vals[i].is_empty() {
                    empty = true;
                    break;
                }
            }
            if empty {
                continue;
            }
            match d {
                1 => {
                    for &(o, v) in &vals[0] {
                        let c = b.slots[o];
                        if c != NONE {
                            out.push((c as usize, v));
                        }
                    }
                }
                2 => {
                    for &(o0, v0) in &vals[0] {
                        for &(o1, v1) in &vals[1] {
                            let c = b.slots[o0 * b.counts[1] + o1];
                            if c != NONE {
                                out.push((c as usize, v0 * v1));
                            }
                        }
                    }
                }
                _ => {
                    let mut pos = vec![0usize; d];
                    'outer: loop {
                        let mut lin = 0usize;
                        let mut v = 1.0;
                        for i in 0..d {
                            let (o, vi) = vals[i][pos[i]];
                            lin = lin * b.counts[i] + o;
                            v *= vi;
                        }
                        let c = b.slots[lin];
                        if c != NONE {
                            out.push((c as usize, v));
                        }
                        let mut ax = d;
                        loop {
                            if ax == 0 {
                                break 'outer;
                            }
                            ax -= 1;
                            pos[ax] += 1;
                            if pos[ax] < vals[ax].len() {
                                break;
                            }
                            pos[ax] = 0;
                        }
                    }
                }
            }
        }
    }

    /// Midpoints of the dyadic cells of side `2^-(J + extra)` that meet the
    /// bounding box of `O_0^δ`, together with the cell volume.
    pub fn quadrature_nodes(&self, extra: u32) -> (Vec<Vec<f64>>, f64) {
        let level = self.j + extra;
        let s = (1u64 << level) as f64;
        let (a, b) = self.regions.o0_delta.bounding_box();
        let lo: Vec<i64> = a.iter().map(|v| (v * s).floor() as i64).collect();
        let counts: Vec<usize> = b.iter().zip(&lo).map(|(v, l)| ((v * s).ceil() as i64 - l) as usize).collect();
        let mut nodes = Vec::with_capacity(counts.iter().product());
        for_each_shift(&lo, &counts, |r| nodes.push(r.iter().map(|&k| (k as f64 + 0.5) / s).collect()));
        (nodes, 1.0 / s.powi(self.dim() as i32))
    }

    /// Gram matrix by midpoint quadrature on a grid `2^extra` times finer than level `J`.
    pub fn gram_quadrature(&self, extra: u32) -> DMatrix<f64> {
        let (nodes, w) = self.quadrature_nodes(extra);
        let k = self.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        let mut row = Vec::new();
        for x in &nodes {
            self.eval_row(x, &mut row);
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    g[(i, j)] += w * vi * vj;
                }
            }
        }
        g
    }
}

/// Coefficients of a function in a basis.
#[derive(Clone, Debug)]
pub struct CoeffVector {
    pub basis: Arc<BasisSpec>,
    pub values: Vec<f64>,
}

impl CoeffVector {
    pub fn zeros(basis: Arc<BasisSpec>) -> Self {
        let n = basis.len();
        Self { basis, values: vec![0.0; n] }
    }

    pub fn new(basis: Arc<BasisSpec>, values: Vec<f64>) -> Result<Self> {
        ensure_dim(basis.len(), values.len())?;
        Ok(Self { basis, values })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut row = Vec::new();
        self.evaluate_with(x, &mut row)
    }

    pub fn evaluate_with(&self, x: &[f64], row: &mut Vec<(usize, f64)>) -> f64 {
        self.basis.eval_row(x, row);
        row.iter().map(|&(c, v)| v * self.values[c]).sum()
    }

    /// `sup_l 2^{l(s + d/2)} max_r |c_{l,r}|`, a sequence-space proxy for the
    /// Hölder-Zygmund norm of order `s`.
    pub fn besov_norm(&self, s: f64) -> f64 {
        let d = self.basis.dim() as f64;
        self.basis
            .indices()
            .iter()
            .zip(&self.values)
            .map(|(idx, c)| 2f64.powf(idx.level as f64 * (s + d / 2.0)) * c.abs())
            .fold(0.0, f64::max)
    }
}

/// L2 projection of `g` onto the span, by midpoint quadrature at `2^(J + extra)`
/// cells per unit length.
pub fn project(basis: &Arc<BasisSpec>, g: impl Fn(&[f64]) -> f64, extra: u32) -> CoeffVector {
    let (nodes, w) = basis.quadrature_nodes(extra);
    let mut c = vec![0.0; basis.len()];
    let mut row = Vec::new();
    for x in &nodes {
        let gx = g(x);
        if gx == 0.0 {
            continue;
        }
        basis.eval_row(x, &mut row);
        for &(k, v) in &row {
            c[k] += w * v * gx;
        }
    }
    CoeffVector { basis: basis.clone(), values: c }
}

/// Coefficients of `f - 1` for a function equal to one off `O_0`.
///
/// Fails when `f` differs from one by more than `tol` at a grid point of the
/// domain outside `O_0`.
pub fn bar_project(basis: &Arc<BasisSpec>, f: impl Fn(&[f64]) -> f64, extra: u32, tol: f64) -> Result<CoeffVector> {
    let regions = &basis.regions;
    let n = 1usize << (basis.j + 2).min(12);
    let (a, b) = regions.domain.bounding_box();
    let d = a.len();
    let mut worst = 0.0f64;
    let counts = vec![n; d];
    let lo = vec![0i64; d];
    for_each_shift(&lo, &counts, |r| {
        let x: Vec<f64> = (0..d).map(|i| a[i] + (b[i] - a[i]) * (r[i] as f64 + 0.5) / n as f64).collect();
        if regions.domain.contains(&x) && !inside_open(&regions.o0, &x) {
            worst = worst.max((f(&x) - 1.0).abs());
        }
    });
    if worst > tol {
        return Err(Error::NotOneOutside(worst));
    }
    Ok(project(basis, |x| f(x) - 1.0, extra))
}

fn inside_open(shape: &Shape, x: &[f64]) -> bool {
    shape.inset_distance(x) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_regions(d: usize, delta: f64) -> NestedRegions {
        NestedRegions::new(Shape::unit_cube(d), delta).unwrap()
    }

    #[test]
    fn minimal_level_matches_hand_count() {
        // DB2 has support length 3 and the gap between O_0 = (0.32, 0.68) and
        // O_0^δ = [0.24, 0.76] is 0.08. At level 5 the outermost supports are
        // [8, 11]/32 and [21, 24]/32; at level 4 the first is [3, 6]/16.
        let fam = WaveletFamily::new(2).unwrap();
        let r = unit_regions(1, 0.16);
        assert!(level_is_feasible(&fam, &r, 5) && level_is_feasible(&fam, &r, 6));
        assert!(!level_is_feasible(&fam, &r, 4));
        assert_eq!(minimal_coarse_level(&fam, &r), 5);
        let fam4 = WaveletFamily::new(4).unwrap();
        assert_eq!(minimal_coarse_level(&fam4, &unit_regions(1, 0.125)), 7);
    }

    #[test]
    fn infeasible_coarse_level_reports_minimum() {
        let fam = Arc::new(WaveletFamily::new(2).unwrap());
        match BasisSpec::new(fam, unit_regions(1, 0.16), 4, 5) {
            Err(Error::InfeasibleLevel { requested: 4, minimal: 5 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_support_lies_in_enlarged_region() {
        let fam = Arc::new(WaveletFamily::new(3).unwrap());
        let b = BasisSpec::minimal(fam.clone(), unit_regions(2, 0.15), 1).unwrap();
        for idx in b.indices() {
            let (lo, hi) = support_rect(&fam, idx.level, &idx.shift);
            assert!(b.regions.o0_delta.contains_rect(&lo, &hi));
            assert!(b.regions.o0.rect_meets_interior(&lo, &hi));
            assert_eq!(b.position(idx).map(|p| &b.indices()[p]), Some(idx));
        }
        let patterns: std::collections::HashSet<_> =
            b.indices().iter().filter(|i| i.level == b.j0).map(|i| i.pattern).collect();
        assert_eq!(patterns.len(), 4);
        assert!(b.indices().iter().filter(|i| i.level > b.j0).all(|i| i.pattern != 0));
    }

    #[test]
    fn eval_row_agrees_with_pointwise_evaluation() {
        let fam = Arc::new(WaveletFamily::new(2).unwrap());
        let b = BasisSpec::minimal(fam, unit_regions(2, 0.15), 1).unwrap();
        let mut row = Vec::new();
        for x in [[0.5, 0.5], [0.31, 0.62], [0.2, 0.75], [0.05, 0.5]] {
            b.eval_row(&x, &mut row);
            let mut dense = vec![0.0; b.len()];
            for &(c, v) in &row {
                dense[c] += v;
            }
            for (k, dv) in dense.iter().enumerate() {
                assert!((b.evaluate(k, &x) - dv).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gram_is_near_identity() {
        let fam = Arc::new(WaveletFamily::new(4).unwrap());
        let b = BasisSpec::minimal(fam, unit_regions(1, 0.125), 2).unwrap();
        let g = b.gram_quadrature(6);
        let mut worst = 0.0f64;
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - want).abs());
            }
        }
        assert!(worst < 1e-3, "max deviation {worst}");
    }

    #[test]
    fn projection_reproduces_span_members() {
        let fam = Arc::new(WaveletFamily::new(4).unwrap());
        let b = Arc::new(BasisSpec::minimal(fam, unit_regions(1, 0.125), 1).unwrap());
        let mut truth = CoeffVector::zeros(b.clone());
        for (k, v) in truth.values.iter_mut().enumerate() {
            *v = ((k * 7919) % 13) as f64 / 13.0 - 0.5;
        }
        let c = project(&b, |x| truth.evaluate(x), 6);
        let err = c.values.iter().zip(&truth.values).map(|(a, t)| (a - t).abs()).fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn bar_project_checks_the_outside() {
        let fam = Arc::new(WaveletFamily::new(4).unwrap());
        let b = Arc::new(BasisSpec::minimal(fam, unit_regions(1, 0.125), 0).unwrap());
        assert!(bar_project(&b, |_| 1.0, 4, 1e-9).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(matches!(bar_project(&b, |x| 1.0 + x[0], 4, 1e-9), Err(Error::NotOneOutside(_))));
    }

    #[test]
    fn kind_strings_round_trip() {
        let idx = TensorIndex { level: 3, pattern: 0b10, shift: vec![1, 2] };
        assert_eq!(idx.kind(2), "sw");
        assert_eq!(TensorIndex::parse_kind("sw").unwrap(), 0b10);
        assert!(TensorIndex::parse_kind("sx").is_err());
    }
}
