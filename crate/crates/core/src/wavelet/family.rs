//! Scaling function and mother wavelet tabulated by the cascade algorithm.

use super::filters;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default dyadic depth of the tables (`2^12` samples per unit length).
pub const DEFAULT_RESOLUTION: u32 = 12;

/// A Daubechies family with `p` vanishing moments.
///
/// `phi` and `psi` are both supported on `[0, 2p - 1]` and are sampled on the
/// dyadic grid `k / 2^resolution`; values in between are linearly interpolated.
#[derive(Clone, Debug)]
pub struct WaveletFamily {
    pub order: usize,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
    pub resolution: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
    psi_sup: f64,
}

impl WaveletFamily {
    pub fn new(order: usize) -> Result<Self> {
        Self::with_resolution(order, DEFAULT_RESOLUTION)
    }

    pub fn with_resolution(order: usize, resolution: u32) -> Result<Self> {
        let h = filters::lowpass(order).ok_or(Error::UnsupportedOrder(order))?.to_vec();
        if !(4..=16).contains(&resolution) {
            return Err(Error::Config(format!("table resolution {resolution} outside 4..=16")));
        }
        let len = h.len();
        let support = len - 1;
        let g: Vec<f64> = (0..len)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * h[len - 1 - k])
            .collect();
        let phi = cascade(&h, resolution)?;
        let scale = 1usize << resolution;
        let n = support * scale + 1;
        let s2 = 2f64.sqrt();
        // psi(x) = sqrt2 * sum_k g_k phi(2x - k)
        let mut psi = vec![0.0; n];
        for (i, out) in psi.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let j = 2 * i as i64 - (k * scale) as i64;
                if j > 0 && (j as usize) < n {
                    acc += gk * phi[j as usize];
                }
            }
            *out = s2 * acc;
        }
        let psi_sup = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { order, lowpass: h, highpass: g, resolution, phi, psi, psi_sup })
    }

    /// Length of the common support `[0, 2p - 1]`.
    pub fn support_len(&self) -> usize {
        self.lowpass.len() - 1
    }

    pub fn phi(&self, x: f64) -> f64 {
        lerp_table(&self.phi, self.resolution, x)
    }

    pub fn psi(&self, x: f64) -> f64 {
        lerp_table(&self.psi, self.resolution, x)
    }

    /// Mother function for `wavelet == false`, wavelet otherwise.
    #[inline]
    pub fn eval(&self, wavelet: bool, x: f64) -> f64 {
        if wavelet {
            self.psi(x)
        } else {
            self.phi(x)
        }
    }

    pub fn psi_sup_norm(&self) -> f64 {
        self.psi_sup
    }

    /// Raw tables on the dyadic grid, for inspection and quadrature checks.
    pub fn tables(&self) -> (&[f64], &[f64]) {
        (&self.phi, &self.psi)
    }
}

#[inline]
fn lerp_table(table: &[f64], resolution: u32, x: f64) -> f64 {
    let t = x * (1u64 << resolution) as f64;
    if !(t > 0.0) {
        return 0.0;
    }
    let i = t as usize;
    if i + 1 >= table.len() {
        return if i + 1 == table.len() && t == i as f64 { table[i] } else { 0.0 };
    }
    let w = t - i as f64;
    table[i] + w * (table[i + 1] - table[i])
}

/// Values of the scaling function on the dyadic grid of the given depth.
fn cascade(h: &[f64], resolution: u32) -> Result<Vec<f64>> {
    let len = h.len();
    let support = len - 1;
    let s2 = 2f64.sqrt();
    // Integer samples: eigenvector of M[k][m] = sqrt2 h[2k - m] with eigenvalue 1,
    // normalized to sum 1.
    let n = support + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        for m in 0..n {
            let j = 2 * k as i64 - m as i64;
            if j >= 0 && (j as usize) < len {
                a[(k, m)] = s2 * h[j as usize];
            }
        }
        a[(k, k)] -= 1.0;
    }
    for m in 0..n {
        a[(n - 1, m)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let ints = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular cascade system".into()))?;

    let scale = 1usize << resolution;
    let size = support * scale + 1;
    let mut phi = vec![0.0; size];
    for k in 0..n {
        phi[k * scale] = ints[k];
    }
    phi[0] = 0.0;
    phi[size - 1] = 0.0;
    for r in 1..=resolution {
        let step = scale >> r;
        let mut i = step;
        while i < size {
            // phi(x) = sqrt2 * sum_j h_j phi(2x - j)
            let mut acc = 0.0;
            for (j, hj) in h.iter().enumerate() {
                let idx = 2 * i as i64 - (j * scale) as i64;
                if idx > 0 && (idx as usize) < size {
                    acc += hj * phi[idx as usize];
                }
            }
            phi[i] = s2 * acc;
            i += 2 * step;
        }
    }
    Ok(phi)
}
