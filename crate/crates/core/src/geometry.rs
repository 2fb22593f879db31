//! Convex domains and the nested interior regions used by the estimator.
//!
//! Two shapes are supported: axis-aligned hyperrectangles and Euclidean balls.
//! Both have closed-form projection, inward normals and insets, and an inset of
//! either shape is again a shape of the same kind.

use crate::error::{ensure_dim, Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Hyperrectangle { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn hyperrectangle(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        ensure_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidRegion("zero-dimensional box".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidRegion(format!("empty box {lower:?} x {upper:?}")));
        }
        Ok(Shape::Hyperrectangle { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Self {
        Shape::Hyperrectangle { lower: vec![0.0; d], upper: vec![1.0; d] }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidRegion("zero-dimensional ball".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRegion(format!("ball radius {radius}")));
        }
        Ok(Shape::Ball { center, radius })
    }

    /// Checks the invariants of a deserialized shape.
    pub fn validated(self) -> Result<Self> {
        match self {
            Shape::Hyperrectangle { lower, upper } => Shape::hyperrectangle(lower, upper),
            Shape::Ball { center, radius } => Shape::ball(center, radius),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Hyperrectangle { lower, .. } => lower.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| b - a).product()
            }
            Shape::Ball { center, radius } => {
                let d = center.len() as f64;
                std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0) * radius.powf(d)
            }
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| *v >= *a && *v <= *b)
            }
            Shape::Ball { center, radius } => dist2(x, center) <= radius * radius,
        }
    }

    /// Distance to the boundary for interior points, negative outside.
    ///
    /// Exact for balls and for interior points of boxes; for points outside a
    /// box only the sign is meaningful.
    pub fn inset_distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Hyperrectangle { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Shape::Ball { center, radius } => radius - dist2(x, center).sqrt(),
        }
    }

    /// Euclidean distance from `x` to the closed set (zero inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Hyperrectangle { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (a, b))| {
                    let e = (a - v).max(v - b).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            Shape::Ball { center, radius } => (dist2(x, center).sqrt() - radius).max(0.0),
        }
    }

    /// Nearest point of the closed set, written into `x` in place.
    /// Returns true when the point moved.
    pub fn project_in_place(&self, x: &mut [f64]) -> bool {
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                let mut moved = false;
                for (v, (a, b)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                    if *v < *a {
                        *v = *a;
                        moved = true;
                    } else if *v > *b {
                        *v = *b;
                        moved = true;
                    }
                }
                moved
            }
            Shape::Ball { center, radius } => {
                let r = dist2(x, center).sqrt();
                if r <= *radius {
                    return false;
                }
                let s = radius / r;
                for (v, c) in x.iter_mut().zip(center) {
                    *v = c + (*v - c) * s;
                }
                true
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        let mut y = x.to_vec();
        self.project_in_place(&mut y);
        Ok(y)
    }

    /// Unit inward normal at a boundary point.
    ///
    /// At edges and corners of a box the normal is the normalized sum of the
    /// inward normals of the active faces.
    pub fn inward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                if !self.contains_with_tol(x, BOUNDARY_TOL) {
                    return Err(Error::NotOnBoundary(-self.distance_to(x)));
                }
                let scale = lower.iter().zip(upper).map(|(a, b)| b - a).fold(0.0, f64::max);
                let tol = BOUNDARY_TOL * scale.max(1.0);
                let mut n = vec![0.0; x.len()];
                for (i, v) in x.iter().enumerate() {
                    if (v - lower[i]).abs() <= tol {
                        n[i] += 1.0;
                    }
                    if (upper[i] - v).abs() <= tol {
                        n[i] -= 1.0;
                    }
                }
                let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::NotOnBoundary(self.inset_distance(x)));
                }
                Ok(n.into_iter().map(|v| v / norm).collect())
            }
            Shape::Ball { center, radius } => {
                let r = dist2(x, center).sqrt();
                if (r - radius).abs() > BOUNDARY_TOL * radius.max(1.0) {
                    return Err(Error::NotOnBoundary(radius - r));
                }
                Ok(center.iter().zip(x).map(|(c, v)| (c - v) / r).collect())
            }
        }
    }

    fn contains_with_tol(&self, x: &[f64], tol: f64) -> bool {
        self.distance_to(x) <= tol
    }

    /// The set of points at distance at least `margin` from the boundary.
    /// Negative margins enlarge the shape.
    pub fn inset(&self, margin: f64) -> Result<Self> {
        match self {
            Shape::Hyperrectangle { lower, upper } => Shape::hyperrectangle(
                lower.iter().map(|a| a + margin).collect(),
                upper.iter().map(|b| b - margin).collect(),
            ),
            Shape::Ball { center, radius } => Shape::ball(center.clone(), radius - margin),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Hyperrectangle { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// True when the axis-aligned box `[lo, hi]` meets the interior of the shape.
    pub fn rect_meets_interior(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Shape::Hyperrectangle { lower, upper } => (0..lo.len()).all(|i| hi[i] > lower[i] && lo[i] < upper[i]),
            Shape::Ball { center, radius } => {
                let d2: f64 = (0..lo.len())
                    .map(|i| {
                        let e = (lo[i] - center[i]).max(center[i] - hi[i]).max(0.0);
                        e * e
                    })
                    .sum();
                d2 < radius * radius
            }
        }
    }

    /// True when the closed box `[lo, hi]` lies inside the closed shape, up to
    /// a relative rounding tolerance.
    pub fn contains_rect(&self, lo: &[f64], hi: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                (0..lo.len()).all(|i| lo[i] >= lower[i] - TOL && hi[i] <= upper[i] + TOL)
            }
            Shape::Ball { center, radius } => {
                let d2: f64 = (0..lo.len())
                    .map(|i| {
                        let e = (lo[i] - center[i]).abs().max((hi[i] - center[i]).abs());
                        e * e
                    })
                    .sum();
                d2 <= radius * radius * (1.0 + TOL)
            }
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Shape::Hyperrectangle { lower, upper } => {
                for (v, (a, b)) in out.iter_mut().zip(lower.iter().zip(upper)) {
                    *v = a + (b - a) * unit_open(rng);
                }
            }
            Shape::Ball { center, radius } => {
                let d = center.len();
                let mut norm = 0.0;
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = z;
                    norm += z * z;
                }
                let norm = norm.sqrt();
                let r = radius * unit_open(rng).powf(1.0 / d as f64);
                for (v, c) in out.iter_mut().zip(center) {
                    *v = c + *v / norm * r;
                }
            }
        }
    }
}

/// Uniform draw on (0, 1) from the top 53 bits.
pub(crate) fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gamma(x: f64) -> f64 {
    // Only half-integers and integers reach this; use the recurrence.
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-12 {
            g *= t;
            t += 1.0;
        }
        g
    }
}

/// Interior regions `K ⊂ O_0 ⊂ O_0^δ ⊂ O` built by uniform insets.
///
/// `K` is at distance `3δ` from the boundary, `O_0` at `2δ`, and the
/// enlargement `O_0^δ` at `3δ/2`. The enlargement of a box is taken to be the
/// enclosing box rather than the rounded box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedRegions {
    pub domain: Shape,
    pub delta: f64,
    pub k: Shape,
    pub o0: Shape,
    pub o0_delta: Shape,
}

impl NestedRegions {
    pub fn new(domain: Shape, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidRegion(format!("delta must be positive, got {delta}")));
        }
        let domain = domain.validated()?;
        let k = domain
            .inset(3.0 * delta)
            .map_err(|_| Error::InvalidRegion(format!("delta {delta} leaves no room for the compact set")))?;
        let o0 = domain.inset(2.0 * delta)?;
        let o0_delta = domain.inset(1.5 * delta)?;
        Ok(Self { domain, delta, k, o0, o0_delta })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn unit_cube_insets() {
        let r = NestedRegions::new(Shape::unit_cube(2), 0.1).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        match (&r.k, &r.o0, &r.o0_delta) {
            (
                Shape::Hyperrectangle { lower: kl, upper: ku },
                Shape::Hyperrectangle { lower: ol, upper: ou },
                Shape::Hyperrectangle { lower: dl, upper: du },
            ) => {
                assert!(close(kl, &[0.3, 0.3]) && close(ku, &[0.7, 0.7]));
                assert!(close(ol, &[0.2, 0.2]) && close(ou, &[0.8, 0.8]));
                assert!(close(dl, &[0.15, 0.15]) && close(du, &[0.85, 0.85]));
            }
            _ => panic!("insets of a box must be boxes"),
        }
    }

    #[test]
    fn too_large_delta_is_rejected() {
        assert!(NestedRegions::new(Shape::unit_cube(1), 0.2).is_err());
        assert!(NestedRegions::new(Shape::unit_cube(1), 0.0).is_err());
    }

    #[test]
    fn corner_normal_is_diagonal() {
        let n = Shape::unit_cube(2).inward_normal(&[0.0, 0.0]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((n[0] - s).abs() < 1e-15 && (n[1] - s).abs() < 1e-15);
        let n = Shape::unit_cube(2).inward_normal(&[1.0, 0.4]).unwrap();
        assert_eq!(n, vec![-1.0, 0.0]);
        assert!(Shape::unit_cube(2).inward_normal(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn ball_normal_and_projection() {
        let b = Shape::ball(vec![0.0, 0.0], 2.0).unwrap();
        let p = b.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
        let n = b.inward_normal(&p).unwrap();
        assert!((n[0] + 0.6).abs() < 1e-12 && (n[1] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn volumes() {
        assert!((Shape::unit_cube(3).volume() - 1.0).abs() < 1e-15);
        let b = Shape::ball(vec![0.0; 3], 1.0).unwrap();
        assert!((b.volume() - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
        let b = Shape::ball(vec![0.0; 2], 2.0).unwrap();
        assert!((b.volume() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn uniform_samples_stay_inside() {
        let mut rng = stream(3, 0);
        let b = Shape::ball(vec![1.0, -1.0, 0.5], 0.3).unwrap();
        let mut x = [0.0; 3];
        let mut mean_r2 = 0.0;
        for _ in 0..20000 {
            b.sample_uniform(&mut rng, &mut x);
            assert!(b.contains(&x));
            mean_r2 += dist2(&x, &[1.0, -1.0, 0.5]) / 20000.0;
        }
        // E|X - c|^2 = 3/5 r^2 for the uniform law on a 3-ball.
        assert!((mean_r2 - 0.6 * 0.09).abs() < 1e-3);
    }

    #[test]
    fn rect_relations() {
        let b = Shape::unit_cube(2).inset(0.25).unwrap();
        assert!(b.rect_meets_interior(&[0.0, 0.0], &[0.3, 0.3]));
        assert!(!b.rect_meets_interior(&[0.0, 0.0], &[0.25, 0.3]));
        assert!(b.contains_rect(&[0.25, 0.3], &[0.75, 0.5]));
        let ball = Shape::ball(vec![0.5, 0.5], 0.25).unwrap();
        assert!(!ball.rect_meets_interior(&[0.0, 0.0], &[0.32, 0.32]));
        assert!(ball.rect_meets_interior(&[0.0, 0.0], &[0.4, 0.4]));
    }
}
