//! Small dense helpers shared by the solvers.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators keep the reduction order fixed and let it vectorize
    let mut acc = [0.0f64; 4];
    let (ca, ta) = a.as_chunks::<4>();
    let (cb, tb) = b.as_chunks::<4>();
    for (x, y) in ca.iter().zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ta.iter().zip(tb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `m x m`. Returns `None` when a pivot falls below `tiny`
/// relative to the largest entry.
pub fn solve(a: &mut [f64], b: &mut [f64], m: usize, tiny: f64) -> Option<()> {
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..m {
        let (piv, piv_val) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val <= tiny * scale {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(col * m + c, piv * m + c);
            }
            b.swap(col, piv);
        }
        let p = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / p;
            if f != 0.0 {
                for c in col..m {
                    a[r * m + c] -= f * a[col * m + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..m).rev() {
        let mut s = b[col];
        for c in col + 1..m {
            s -= a[col * m + c] * b[c];
        }
        b[col] = s / a[col * m + col];
    }
    Some(())
}

/// Upper-triangular `r` with `rᵀ r = g` for a symmetric positive definite
/// row-major `g`. Returns `None` if `g` is not numerically positive definite.
pub fn cholesky_upper(g: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut r = vec![0.0; m * m];
    let diag_scale = (0..m).map(|i| g[i * m + i]).fold(0.0f64, f64::max);
    for j in 0..m {
        let mut s = g[j * m + j];
        for k in 0..j {
            s -= r[k * m + j] * r[k * m + j];
        }
        if !(s > 1e-10 * diag_scale) {
            return None;
        }
        let rjj = s.sqrt();
        r[j * m + j] = rjj;
        for i in j + 1..m {
            let mut s = g[j * m + i];
            for k in 0..j {
                s -= r[k * m + j] * r[k * m + i];
            }
            r[j * m + i] = s / rjj;
        }
    }
    Some(r)
}
