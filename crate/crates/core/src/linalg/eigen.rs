//! Nonsymmetric eigenvalue computation.
//!
//! Pipeline: diagonal balancing, Householder reduction to upper Hessenberg
//! form, then Francis double-shift QR sweeps with deflation. The sweep code
//! follows the classic EISPACK `hqr` lineage, including the exceptional
//! shift taken every ten stalled sweeps, which is what breaks the cycles
//! that plain Wilkinson shifts hit on permutation-like matrices.

use super::{LinalgError, Matrix, Result};
use num_complex::Complex64;

/// Sweeps allowed per eigenvalue before giving up.
const SWEEP_BUDGET: usize = 60;

pub(crate) fn eig(m: &Matrix) -> Result<Vec<Complex64>> {
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    if n == 1 {
        return Ok(vec![Complex64::new(a[0][0], 0.0)]);
    }
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

/// Similarity scaling by powers of two so that row and column norms match.
/// Exact in floating point (powers of the radix) and it sharpens the
/// accuracy of the QR sweeps on badly scaled inputs.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= ginv;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
        if done {
            return;
        }
    }
}

/// In-place Householder similarity reduction to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let mut norm_sq = 0.0;
        for row in a.iter().take(n).skip(k + 1) {
            norm_sq += row[k] * row[k];
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] >= 0.0 { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vtv: f64 = v[k + 1..n].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;

        // Left application: A := (I - beta v vᵀ) A.
        for j in 0..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * a[i][j];
            }
            s *= beta;
            for i in k + 1..n {
                a[i][j] -= s * v[i];
            }
        }
        // Right application: A := A (I - beta v vᵀ).
        for row in a.iter_mut().take(n) {
            let mut s = 0.0;
            for j in k + 1..n {
                s += row[j] * v[j];
            }
            s *= beta;
            for j in k + 1..n {
                row[j] -= s * v[j];
            }
        }

        a[k + 1][k] = alpha;
        for row in a.iter_mut().take(n).skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Consumes the
/// matrix, returns its eigenvalues.
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut t = 0.0_f64;
    let mut nn = n; // eigenvalues with index >= nn are done
    while nn > 0 {
        let hi = nn - 1;
        let mut its = 0usize;
        loop {
            // Deflation scan: find the lowest l with a negligible
            // subdiagonal entry a[l][l-1].
            let mut l = hi;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= f64::EPSILON * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }

            let mut x = a[hi][hi];
            if l == hi {
                // Single real eigenvalue.
                wr[hi] = x + t;
                wi[hi] = 0.0;
                nn -= 1;
                break;
            }

            let mut y = a[hi - 1][hi - 1];
            let mut w = a[hi][hi - 1] * a[hi - 1][hi];
            if l + 1 == hi {
                // Trailing 2x2 block: solve its quadratic directly.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    wr[hi - 1] = x + z;
                    wr[hi] = wr[hi - 1];
                    if z != 0.0 {
                        wr[hi] = x - w / z;
                    }
                    wi[hi - 1] = 0.0;
                    wi[hi] = 0.0;
                } else {
                    wr[hi - 1] = x + p;
                    wr[hi] = x + p;
                    wi[hi] = z;
                    wi[hi - 1] = -z;
                }
                nn -= 2;
                break;
            }

            if its == SWEEP_BUDGET {
                return Err(LinalgError::EigenNoConvergence);
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 0..=hi {
                    a[i][i] -= x;
                }
                let s = a[hi][hi - 1].abs() + a[hi - 1][hi - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // Look for two consecutive small subdiagonals starting the
            // implicit double shift.
            let mut m = hi - 2;
            let mut p;
            let mut q;
            let mut r;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=hi {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }

            // Double QR sweep over rows l..=hi.
            for k in m..hi {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != hi - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let magnitude = (p * p + q * q + r * r).sqrt();
                let s = if p >= 0.0 { magnitude } else { -magnitude };
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[k][k - 1] = -a[k][k - 1];
                    }
                } else {
                    a[k][k - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;

                // Row modification.
                for j in k..=hi {
                    let mut pp = a[k][j] + q * a[k + 1][j];
                    if k != hi - 1 {
                        pp += r * a[k + 2][j];
                        a[k + 2][j] -= pp * z;
                    }
                    a[k + 1][j] -= pp * y;
                    a[k][j] -= pp * x;
                }
                // Column modification.
                let mmin = if hi < k + 3 { hi } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[i][k] + y * a[i][k + 1];
                    if k != hi - 1 {
                        pp += z * a[i][k + 2];
                        a[i][k + 2] -= pp * r;
                    }
                    a[i][k + 1] -= pp * q;
                    a[i][k] -= pp;
                }
            }
        }
    }

    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}
