//! Adaptive Gauss-Kronrod (7/15) quadrature on intervals and nested boxes.

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod rule; returns (estimate, error estimate).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive bisection until the summed error estimate is below
/// `abs_tol + rel_tol * |I|`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let mut stack = vec![(a, b, gk15(&mut f, a, b))];
    let mut done_val = 0.0;
    let mut done_err = 0.0;
    let mut iters = 0;
    while let Some(&(lo, hi, (val, err))) = stack.last() {
        let pending: f64 = stack.iter().map(|s| s.2 .0).sum::<f64>() + done_val;
        let tol = abs_tol.max(rel_tol * pending.abs());
        let width_share = (hi - lo) / (b - a);
        stack.pop();
        iters += 1;
        if err <= tol * width_share || iters > 20_000 || hi - lo < 1e-14 * (b - a).abs() {
            done_val += val;
            done_err += err;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        stack.push((lo, mid, left));
        stack.push((mid, hi, right));
    }
    let _ = done_err;
    done_val
}

/// Nested adaptive integration over a box `[lo, hi]` in one or two dimensions.
pub fn integrate_box<F: FnMut(&[f64]) -> f64>(mut f: F, lo: &[f64], hi: &[f64], abs_tol: f64, rel_tol: f64) -> f64 {
    match lo.len() {
        1 => integrate(|x| f(&[x]), lo[0], hi[0], abs_tol, rel_tol),
        2 => integrate(
            |x| integrate(|y| f(&[x, y]), lo[1], hi[1], abs_tol * 0.1, rel_tol * 0.1),
            lo[0],
            hi[0],
            abs_tol,
            rel_tol,
        ),
        d => panic!("nested quadrature supports d <= 2, got {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_low_degree_polynomials() {
        for k in 0..=21 {
            let (v, _) = gk15(&mut |x: f64| x.powi(k), 0.0, 1.0);
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = integrate(|x| (-(x * x) / (2.0 * 1e-4)).exp(), -1.0, 1.0, 1e-14, 1e-12);
        let exact = (2.0 * std::f64::consts::PI * 1e-4).sqrt() * erf(1.0 / (2e-4f64).sqrt());
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn nested_box() {
        let v = integrate_box(|p| (p[0] + p[1]).sin(), &[0.0, 0.0], &[1.0, 2.0], 1e-12, 1e-12);
        // integral of sin(x+y) = -sin(x+y) over the box corners.
        let exact: f64 = -(3f64).sin() + (2f64).sin() + (1f64).sin();
        assert!((v - exact).abs() < 1e-10);
    }

    fn erf(x: f64) -> f64 {
        // Series is enough for the arguments used here.
        if x > 6.0 {
            return 1.0;
        }
        let mut sum: f64 = 0.0;
        let mut term = x;
        let mut n = 0;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) || n < 5 {
            sum += term / (2 * n + 1) as f64;
            n += 1;
            term *= -x * x / n as f64;
            if n > 400 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }
}
