//! Hypercube of perturbations used for minimax lower bounds.

use super::field::{DiffusivityField, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::NestedRegions;
use crate::wavelet::WaveletFamily;
use std::collections::HashMap;
use std::sync::Arc;

/// Members `f_ε = 1 + γ Σ_ℓ ε_ℓ ψ_{J,ℓ}` indexed by sign vectors `ε`.
///
/// `ψ_{J,ℓ}` are pure tensor wavelets at level `J` whose supports are pairwise
/// disjoint and contained in a cube inside `K`.
#[derive(Clone, Debug)]
pub struct AssouadFamily {
    pub family: Arc<WaveletFamily>,
    pub level: u32,
    pub gamma: f64,
    /// Admissible translations per axis; the index set is their product.
    pub shifts: Vec<Vec<i64>>,
    pub f_min: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AssouadParams {
    pub s: f64,
    pub n: f64,
    pub gamma_scale: f64,
    pub j_scale: f64,
    /// Bound on the smoothness proxy `2^{J(s + d/2)} γ`.
    pub norm_bound: f64,
    pub f_min: f64,
}

impl Default for AssouadParams {
    fn default() -> Self {
        Self { s: 2.0, n: 1e4, gamma_scale: 0.5, j_scale: 1.0, norm_bound: f64::INFINITY, f_min: super::DEFAULT_F_MIN }
    }
}

/// Level with `2^J` the power of two nearest to `j_scale N^{1/(2s+d)}`.
pub fn assouad_level(p: &AssouadParams, d: usize) -> u32 {
    let target = p.j_scale * p.n.powf(1.0 / (2.0 * p.s + d as f64));
    target.log2().round().max(0.0) as u32
}

fn limits(family: &WaveletFamily, level: u32, d: usize, p: &AssouadParams) -> (f64, f64) {
    let scale = (2f64.powf(level as f64 / 2.0) * family.psi_sup_norm()).powi(d as i32);
    let sup_limit = (1.0 - 2.0 * p.f_min) / scale;
    let norm_limit = p.norm_bound / 2f64.powf(level as f64 * (p.s + d as f64 / 2.0));
    (sup_limit, norm_limit)
}

/// Largest `gamma_scale` not above the requested one that keeps every member
/// inside the parameter space.
pub fn clip_gamma_scale(family: &WaveletFamily, d: usize, p: &AssouadParams) -> f64 {
    let (a, b) = limits(family, assouad_level(p, d), d, p);
    p.gamma_scale.min(a.min(b) * p.n.sqrt() * (1.0 - 1e-12))
}

pub fn assouad_family(
    family: Arc<WaveletFamily>,
    regions: &NestedRegions,
    cube: (&[f64], &[f64]),
    p: &AssouadParams,
) -> Result<AssouadFamily> {
    let d = regions.dim();
    let (c1, c2) = cube;
    if c1.len() != d || c2.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c1.len() });
    }
    if !regions.k.contains_rect(c1, c2) {
        return Err(Error::Config(format!("cube {c1:?} x {c2:?} is not inside K")));
    }
    let level = assouad_level(p, d);
    let s = (1u64 << level) as f64;
    let l = family.support_len() as i64;
    let mut shifts = Vec::with_capacity(d);
    for i in 0..d {
        let mut axis = Vec::new();
        let mut r = (c1[i] * s).ceil() as i64;
        while ((r + l) as f64) <= c2[i] * s {
            axis.push(r);
            r += l;
        }
        if axis.is_empty() {
            return Err(Error::Config(format!(
                "no wavelet at level {level} (support {}) fits in the cube along axis {i}",
                l as f64 / s
            )));
        }
        shifts.push(axis);
    }
    let gamma = p.gamma_scale / p.n.sqrt();
    let (sup_limit, norm_limit) = limits(&family, level, d, p);
    if gamma > sup_limit {
        return Err(Error::Config(format!(
            "gamma {gamma:e} exceeds {sup_limit:e}, the largest value keeping inf f >= 2 f_min"
        )));
    }
    if gamma > norm_limit {
        return Err(Error::Config(format!(
            "gamma {gamma:e} exceeds {norm_limit:e}, the largest value keeping the smoothness proxy below {}",
            p.norm_bound
        )));
    }
    Ok(AssouadFamily { family, level, gamma, shifts, f_min: p.f_min })
}

impl AssouadFamily {
    pub fn dim(&self) -> usize {
        self.shifts.len()
    }

    /// Number of hypercube coordinates.
    pub fn len(&self) -> usize {
        self.shifts.iter().map(|s| s.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Translation for coordinate `k` (last axis fastest).
    pub fn shift(&self, mut k: usize) -> Vec<i64> {
        let mut r = vec![0; self.dim()];
        for ax in (0..self.dim()).rev() {
            let n = self.shifts[ax].len();
            r[ax] = self.shifts[ax][k % n];
            k /= n;
        }
        r
    }

    pub fn member(&self, signs: &[bool]) -> Result<DiffusivityField> {
        if signs.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: signs.len() });
        }
        let terms: HashMap<Vec<i64>, f64> = signs
            .iter()
            .enumerate()
            .map(|(k, &plus)| (self.shift(k), if plus { self.gamma } else { -self.gamma }))
            .collect();
        Ok(DiffusivityField::direct(
            ScalarField::WaveletTerms { family: self.family.clone(), level: self.level, offset: 1.0, terms },
            self.f_min,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::model::l2_distance;

    fn setup(d: usize) -> (Arc<WaveletFamily>, NestedRegions) {
        (Arc::new(WaveletFamily::new(2).unwrap()), NestedRegions::new(Shape::unit_cube(d), 0.1).unwrap())
    }

    #[test]
    fn sign_flip_changes_one_support_only() {
        let (fam, r) = setup(1);
        let p = AssouadParams { n: 1e4, j_scale: 8.0, ..Default::default() };
        let a = assouad_family(fam, &r, (&[0.3], &[0.7]), &p).unwrap();
        assert_eq!(a.level, 6);
        assert!(a.len() >= 3);
        let plus = vec![true; a.len()];
        let mut flip = plus.clone();
        flip[1] = false;
        let fp = a.member(&plus).unwrap();
        let ff = a.member(&flip).unwrap();
        let d2 = l2_distance(&fp, &ff, &r.domain, 1 << 16).powi(2);
        assert!((d2 / (4.0 * a.gamma * a.gamma) - 1.0).abs() < 2e-3, "{d2}");
        let all_minus = a.member(&vec![false; a.len()]).unwrap();
        let d2 = l2_distance(&fp, &all_minus, &r.domain, 1 << 16).powi(2);
        assert!((d2 / (4.0 * a.gamma * a.gamma * a.len() as f64) - 1.0).abs() < 2e-3);
        // f = 1 off K
        assert_eq!(fp.max_deviation_outside(&r.domain, &r.k, 257), 0.0);
    }

    #[test]
    fn two_dimensional_members() {
        let (fam, r) = setup(2);
        let p = AssouadParams { n: 1e4, j_scale: 4.0, ..Default::default() };
        let a = assouad_family(fam, &r, (&[0.3, 0.3], &[0.7, 0.7]), &p).unwrap();
        assert_eq!(a.level, 4);
        let n = a.len();
        assert_eq!(n, a.shifts[0].len() * a.shifts[1].len());
        let plus = a.member(&vec![true; n]).unwrap();
        let minus = a.member(&vec![false; n]).unwrap();
        let d2 = l2_distance(&plus, &minus, &r.domain, 2048).powi(2);
        assert!((d2 / (4.0 * a.gamma * a.gamma * n as f64) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn scales_are_checked_and_clipped() {
        let (fam, r) = setup(1);
        let p = AssouadParams { n: 100.0, j_scale: 16.0, gamma_scale: 50.0, ..Default::default() };
        assert!(assouad_family(fam.clone(), &r, (&[0.3], &[0.7]), &p).is_err());
        let clipped = AssouadParams { gamma_scale: clip_gamma_scale(&fam, 1, &p), ..p };
        let a = assouad_family(fam, &r, (&[0.3], &[0.7]), &clipped).unwrap();
        let f = a.member(&vec![true; a.len()]).unwrap();
        let nodes = crate::model::GridField::nodes(&[0.0], &[1.0], &[4097]);
        f.check_lower_bound(nodes.iter().map(|v| v.as_slice())).unwrap();
        assert!(nodes.iter().all(|x| f.value(x) >= 2.0 * a.f_min - 1e-12));
        assert!(assouad_family(a.family.clone(), &r, (&[0.2], &[0.7]), &clipped).is_err());
    }
}
