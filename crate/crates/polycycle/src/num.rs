//! Small numeric utilities shared across modules: bracketed root finding
//! and linear least squares on two-parameter models.

/// Bracketed hybrid root finder (Brent's method: bisection + secant +
/// inverse quadratic interpolation).  Monotonically convergent on any
/// bracket with a sign change; immune to near-tangent configurations
/// because every iterate stays inside the bracket.
///
/// Returns the abscissa once the bracket is below `xtol` (absolute) or the
/// residual is below `ftol`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a0: f64,
    b0: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Option<f64> {
    let (mut a, mut b) = (a0, b0);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    // Keep |f(b)| <= |f(a)|: b is the best iterate.
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.abs() <= ftol {
            return Some(b);
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Attempt inverse quadratic interpolation (secant if a == c).
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = f(b);
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Some(b)
}

/// Ordinary least squares for the line y = slope·x + intercept.
/// Returns (slope, intercept, residual RMS).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

/// Least squares for y = c₀·x₀ + c₁·x₁ + c₂·x₂ over three given columns,
/// solved via the 3×3 normal equations.  Returns (coefficients, residual
/// RMS), or None when the normal matrix is numerically singular.
pub fn lstsq3(cols: [&[f64]; 3], y: &[f64]) -> Option<([f64; 3], f64)> {
    let n = y.len();
    assert!(cols.iter().all(|c| c.len() == n));
    let mut m = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for i in 0..3 {
        for j in i..3 {
            let s: f64 = (0..n).map(|k| cols[i][k] * cols[j][k]).sum();
            m[i][j] = s;
            m[j][i] = s;
        }
        b[i] = (0..n).map(|k| cols[i][k] * y[k]).sum();
    }
    // Gaussian elimination with partial pivoting.
    let mut a = [[0.0f64; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        a.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            return None;
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut c = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = a[i][3];
        for k in i + 1..3 {
            s -= a[i][k] * c[k];
        }
        c[i] = s / a[i][i];
    }
    let ss: f64 = (0..n)
        .map(|k| {
            let r = y[k] - c[0] * cols[0][k] - c[1] * cols[1][k] - c[2] * cols[2][k];
            r * r
        })
        .sum();
    Some((c, (ss / n as f64).sqrt()))
}

/// Log-uniform grid of `n` points from `lo` to `hi` (inclusive), descending
/// when lo > hi.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq3_recovers_exact_coefficients() {
        let x: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let ones = vec![1.0; 20];
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let y: Vec<f64> = (0..20).map(|i| 2.0 - 0.5 * x[i] + 3.0 * x2[i]).collect();
        let (c, rms) = lstsq3([&ones, &x, &x2], &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10 && (c[1] + 0.5).abs() < 1e-10 && (c[2] - 3.0).abs() < 1e-10);
        assert!(rms < 1e-10);
    }

    #[test]
    fn geomspace_endpoints_and_ratios() {
        let g = geomspace(1e-6, 1e-3, 4);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[3] - 1e-3).abs() < 1e-15);
        assert!((g[1] / g[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn brent_finds_simple_root() {
        let root = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 0.0, 100).unwrap();
        assert!((root - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-14, 0.0, 100).is_none());
    }

    #[test]
    fn brent_handles_near_tangent() {
        // Root of multiplicity-like flatness: f = (x - 1)^3.
        let root = brent(|x| (x - 1.0).powi(3), 0.0, 3.0, 1e-12, 0.0, 200).unwrap();
        assert!((root - 1.0).abs() < 1e-4);
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.5).collect();
        let (m, b, rms) = linear_fit(&xs, &ys);
        assert!((m - 3.0).abs() < 1e-12);
        assert!((b + 1.5).abs() < 1e-12);
        assert!(rms < 1e-12);
    }
}
