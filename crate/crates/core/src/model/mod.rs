//! Parameter spaces, the link function, rate calculators and truth fields.

pub mod assouad;
pub mod field;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use assouad::{assouad_family, AssouadFamily};
pub use field::{l2_distance, Bump, Cutoff, DiffusivityField, GridField, ScalarField};

/// Default lower bound of the link function.
pub const DEFAULT_F_MIN: f64 = 0.25;

/// Minimal smoothness `max(4, 2 floor(d/4 + 1/2))`.
pub fn alpha_d(d: usize) -> usize {
    4.max(2 * ((d as f64 / 4.0 + 0.5).floor() as usize))
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.5 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("sampling exponent a = {a} must lie in (1/2, 1)")))
    }
}

/// Smoothness threshold `max(4 + d/2, (2 - ad)/(2a - 1), d(1 + a)/(2(1 - a)))`.
pub fn s_star(d: usize, a: f64) -> Result<f64> {
    check_a(a)?;
    let d = d as f64;
    Ok((4.0 + d / 2.0).max((2.0 - a * d) / (2.0 * a - 1.0)).max(d * (1.0 + a) / (2.0 * (1.0 - a))))
}

/// The same threshold with the terms that cannot bind dropped case by case.
pub fn s_star_piecewise(d: usize, a: f64) -> Result<f64> {
    check_a(a)?;
    let df = d as f64;
    let base = 4.0 + df / 2.0;
    let hi = df * (1.0 + a) / (2.0 * (1.0 - a));
    let mid = (2.0 - a * df) / (2.0 * a - 1.0);
    Ok(match d {
        0 => return Err(Error::Config("dimension must be positive".into())),
        1 | 2 => base.max(mid).max(hi),
        3 if a < 2.0 / 3.0 => base.max(mid).max(hi),
        3 => base.max(hi),
        _ => hi,
    })
}

/// Threshold on `s` under which the usual sequence choices satisfy the main
/// conditions: `(2 - ad)/(2a - 1)` for `d <= 2`, and for `d = 3` with
/// `a <= 2/3`; zero otherwise.
pub fn remark_threshold(d: usize, a: f64) -> Result<f64> {
    check_a(a)?;
    let df = d as f64;
    Ok(match d {
        0 => return Err(Error::Config("dimension must be positive".into())),
        1 | 2 => (2.0 - a * df) / (2.0 * a - 1.0),
        3 if a <= 2.0 / 3.0 => (2.0 - a * df) / (2.0 * a - 1.0),
        _ => 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkReport {
    pub threshold: f64,
    pub s: f64,
    pub holds: bool,
}

pub fn check_remark_conditions(d: usize, a: f64, s: f64) -> Result<RemarkReport> {
    let threshold = remark_threshold(d, a)?;
    Ok(RemarkReport { threshold, s, holds: s > threshold })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub d: usize,
    pub a: f64,
    pub s: f64,
    pub n: f64,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        check_a(self.a)?;
        if self.d == 0 || !(self.s > 0.0) || !(self.n >= 2.0) {
            return Err(Error::Config(format!("invalid rate parameters {self:?}")));
        }
        Ok(())
    }

    /// Sampling interval `D = N^{-a}`.
    pub fn sampling_interval(&self) -> f64 {
        self.n.powf(-self.a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SequenceBundle {
    pub eps_n: f64,
    /// `eps_kN` for `k = 1, 2, 3`.
    pub eps_k: [f64; 3],
    pub xi_n: f64,
    pub d_interval: f64,
    pub e_n: f64,
    pub v_n: f64,
}

pub fn rate_sequences(rp: &RateParams) -> Result<SequenceBundle> {
    rp.validate()?;
    let d = rp.d as f64;
    let n = rp.n;
    let denom = 2.0 * rp.s + d;
    let eps = n.powf(-rp.s / denom);
    let eps_k = [1.0, 2.0, 3.0].map(|k| n.powf(-(rp.s - k) / denom));
    let dd = rp.sampling_interval();
    let e2 = eps * eps;
    let e_n = e2 * (1.0 + eps_k[1] / e2 * dd + eps_k[2] / e2 * dd.powf(1.5));
    let v_n = n * e2
        + n * e2 * e2 / dd
        + n * n * eps_k[1] * eps_k[1] * dd * dd
        + n * n * eps_k[2] * eps_k[2] * dd.powi(3)
        + n * n * dd.powi(4);
    Ok(SequenceBundle { eps_n: eps, eps_k, xi_n: eps, d_interval: dd, e_n, v_n })
}

/// Reported lower bound `r * D` on the spectral gap of the transition operator
/// for a user-supplied constant `r`.
pub fn spectral_gap_lower_bound(r: f64, d_interval: f64) -> f64 {
    r * d_interval
}

/// `Φ(x) = f_min + (1 - f_min) e^x`.
#[inline]
pub fn link_phi(x: f64, f_min: f64) -> f64 {
    f_min + (1.0 - f_min) * x.exp()
}

#[inline]
pub fn link_phi_derivative(x: f64, f_min: f64) -> f64 {
    (1.0 - f_min) * x.exp()
}

pub fn link_phi_inverse(y: f64, f_min: f64) -> Result<f64> {
    if !(y > f_min) {
        return Err(Error::Config(format!("link inverse needs y > f_min = {f_min}, got {y}")));
    }
    Ok(((y - f_min) / (1.0 - f_min)).ln())
}
