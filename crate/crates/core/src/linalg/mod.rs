//! Dense real linear algebra kernel.
//!
//! Everything here is sized for observer design problems: matrices stay
//! below a few hundred rows, so dense row-major storage and direct methods
//! are the right trade. The eigenvalue path (Hessenberg reduction plus
//! shifted QR) lives in [`eigen`].

mod eigen;

use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Largest square dimension the eigenvalue routines accept.
pub const MAX_EIGEN_DIM: usize = 200;

/// Pivot magnitudes at or below this are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("entry count {found} does not match shape {rows}x{cols}")]
    ShapeEntryMismatch { rows: usize, cols: usize, found: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("singular system: pivot magnitude {magnitude:.3e} at pivot index {index} is below the 1e-12 floor")]
    SingularPivot { index: usize, magnitude: f64 },
    #[error("eigenvalue iteration did not converge within the sweep budget")]
    EigenNoConvergence,
    #[error("matrix is not Hurwitz: largest eigenvalue real part is {max_real:.6e}")]
    NotHurwitz { max_real: f64 },
    #[error("{name} must be symmetric positive definite")]
    NotSymmetricPositiveDefinite { name: &'static str },
    #[error("Riccati integration did not reach steady state within the step budget")]
    RiccatiNoConvergence,
}

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(LinalgError::ShapeEntryMismatch {
                rows,
                cols,
                found: entries.len(),
            });
        }
        for (k, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFiniteEntry {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                });
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch {
                    context: "rows of unequal length".into(),
                });
            }
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix add shape mismatch"
        );
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix sub shape mismatch"
        );
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matrix product shape mismatch: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copies `block` into this matrix with its top-left corner at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    /// Symmetric part (M + Mᵀ)/2.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i))
        })
    }

    fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

/// Euclidean norm of a vector slice.
pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Set of eigenvalues of a real square matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }
}

/// All eigenvalues of a square matrix, sorted by real part then imaginary
/// part. Balances, reduces to upper Hessenberg form with Householder
/// reflections, then runs Francis double-shift QR sweeps.
pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    let n = m.require_square()?;
    if n > MAX_EIGEN_DIM {
        return Err(LinalgError::DimensionTooLarge {
            dim: n,
            max: MAX_EIGEN_DIM,
        });
    }
    let mut vals = eigen::eig(m)?;
    vals.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(Spectrum { eigenvalues: vals })
}

/// (max real part, min real part) over the spectrum of `m`.
pub fn spectral_bounds(m: &Matrix) -> Result<(f64, f64)> {
    let s = eigenvalues(m)?;
    Ok((s.max_real_part(), s.min_real_part()))
}

/// True when every eigenvalue satisfies Re λ < -margin.
pub fn is_hurwitz(m: &Matrix, margin: f64) -> Result<bool> {
    assert!(margin >= 0.0, "margin must be nonnegative");
    let (max_re, _) = spectral_bounds(m)?;
    Ok(max_re < -margin)
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// LU factorization with partial pivoting. Returns the packed factors and
/// the row permutation. Pivots at or below `PIVOT_FLOOR` are rejected.
fn lu_factor(a: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let n = a.require_square()?;
    let mut lu: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut pmax = 0.0;
        let mut prow = k;
        for (i, row) in lu.iter().enumerate().take(n).skip(k) {
            let v = row[k].abs();
            if v > pmax {
                pmax = v;
                prow = i;
            }
        }
        if pmax <= PIVOT_FLOOR {
            return Err(LinalgError::SingularPivot {
                index: k,
                magnitude: pmax,
            });
        }
        lu.swap(k, prow);
        perm.swap(k, prow);
        let pivot = lu[k][k];
        for i in k + 1..n {
            let m = lu[i][k] / pivot;
            lu[i][k] = m;
            if m != 0.0 {
                for j in k + 1..n {
                    lu[i][j] -= m * lu[k][j];
                }
            }
        }
    }
    Ok((lu, perm))
}

fn lu_solve(lu: &[Vec<f64>], perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = lu.len();
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        for j in 0..i {
            x[i] -= lu[i][j] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= lu[i][j] * x[j];
        }
        x[i] /= lu[i][i];
    }
    x
}

/// Solves A x = b by partial-pivoting Gaussian elimination with one round
/// of iterative refinement.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.require_square()?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            context: format!("system is {n}x{n} but right-hand side has length {}", b.len()),
        });
    }
    let (lu, perm) = lu_factor(a)?;
    let mut x = lu_solve(&lu, &perm, b);
    // One refinement pass tightens the residual for mildly conditioned systems.
    let ax = a.matvec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let dx = lu_solve(&lu, &perm, &r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    Ok(x)
}

/// Matrix inverse through the LU factorization.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    let (lu, perm) = lu_factor(a)?;
    let mut out = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu_solve(&lu, &perm, &e);
        for i in 0..n {
            out.set(i, j, col[i]);
        }
        e[j] = 0.0;
    }
    Ok(out)
}

/// Solves Mᵀ P + P M = -2 mu I for symmetric positive definite P.
///
/// The equation is vectorized column-wise into
/// (I ⊗ Mᵀ + Mᵀ ⊗ I) vec(P) = -2 mu vec(I) and solved densely, which is
/// exact for the small observer dimensions this crate targets. The result
/// is symmetrized to remove roundoff asymmetry.
pub fn solve_lyapunov(m: &Matrix, mu: f64) -> Result<Matrix> {
    let n = m.require_square()?;
    assert!(mu > 0.0, "mu must be positive");
    let (max_re, _) = spectral_bounds(m)?;
    if max_re >= 0.0 {
        return Err(LinalgError::NotHurwitz { max_real: max_re });
    }
    let mt = m.transpose();
    let eye = Matrix::identity(n);
    let system = kron(&eye, &mt).add(&kron(&mt, &eye));
    let mut rhs = vec![0.0; n * n];
    for j in 0..n {
        rhs[j * n + j] = -2.0 * mu;
    }
    let vec_p = solve_linear(&system, &rhs)?;
    // Column-stacked unpack: entry (i, j) sits at index j*n + i.
    let p = Matrix::from_fn(n, n, |i, j| vec_p[j * n + i]);
    Ok(p.symmetrized())
}

pub(crate) fn require_spd(m: &Matrix, name: &'static str) -> Result<()> {
    let n = m.require_square()?;
    let scale = m.max_abs_entry().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-10 * scale {
                return Err(LinalgError::NotSymmetricPositiveDefinite { name });
            }
        }
    }
    let (_, min_re) = spectral_bounds(m)?;
    if min_re <= 0.0 {
        return Err(LinalgError::NotSymmetricPositiveDefinite { name });
    }
    Ok(())
}

fn riccati_rhs(a: &Matrix, q: &Matrix, r_inv: &Matrix, p: &Matrix) -> Matrix {
    // A P + P Aᵀ + Q - P R⁻¹ P
    let ap = a.matmul(p);
    let pat = p.matmul(&a.transpose());
    let prp = p.matmul(&r_inv.matmul(p));
    ap.add(&pat).add(q).sub(&prp)
}

fn riccati_rk4(a: &Matrix, q: &Matrix, r_inv: &Matrix, p: &Matrix, dt: f64) -> Matrix {
    let k1 = riccati_rhs(a, q, r_inv, p);
    let k2 = riccati_rhs(a, q, r_inv, &p.add(&k1.scale(dt / 2.0)));
    let k3 = riccati_rhs(a, q, r_inv, &p.add(&k2.scale(dt / 2.0)));
    let k4 = riccati_rhs(a, q, r_inv, &p.add(&k3.scale(dt)));
    let incr = k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4);
    p.add(&incr.scale(dt / 6.0))
}

/// Solves the continuous algebraic Riccati equation
/// A P + P Aᵀ + Q - P R⁻¹ P = 0 for the stabilizing positive definite P.
///
/// Integrates the differential form dP/dt = A P + P Aᵀ + Q - P R⁻¹ P from
/// P(0) = Q with step-doubling adaptive RK4 until dP/dt is negligible.
/// Forward integration converges to the stabilizing solution for any
/// symmetric positive definite Q and R, including the nilpotent chain
/// matrices used by the observer design, where Newton iterations would
/// first need a stabilizing seed.
pub fn solve_care(a: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    if q.rows() != n || q.cols() != n || r.rows() != n || r.cols() != n {
        return Err(LinalgError::DimensionMismatch {
            context: format!("A is {n}x{n}; Q and R must match"),
        });
    }
    require_spd(q, "Q")?;
    require_spd(r, "R")?;
    let r_inv = inverse(r)?;

    let mut p = q.clone();
    let mut dt = 1e-3_f64;
    const MAX_STEPS: usize = 400_000;
    const DT_MAX: f64 = 1.0;
    const DERIVATIVE_FLOOR: f64 = 1e-11;

    let mut steps = 0;
    loop {
        let pdot = riccati_rhs(a, q, &r_inv, &p);
        if pdot.frobenius_norm() <= DERIVATIVE_FLOOR {
            break;
        }
        if steps >= MAX_STEPS {
            return Err(LinalgError::RiccatiNoConvergence);
        }
        steps += 1;

        let full = riccati_rk4(a, q, &r_inv, &p, dt);
        let half = riccati_rk4(a, q, &r_inv, &p, dt / 2.0);
        let two_half = riccati_rk4(a, q, &r_inv, &half, dt / 2.0);
        let err = full.sub(&two_half).frobenius_norm();
        let tol = 1e-10 * (1.0 + p.frobenius_norm());
        if err > tol && dt > 1e-8 {
            dt *= 0.5;
            continue;
        }
        p = two_half.symmetrized();
        if err < tol / 64.0 && dt < DT_MAX {
            dt = (dt * 2.0).min(DT_MAX);
        }
    }

    let residual = riccati_rhs(a, q, &r_inv, &p).frobenius_norm();
    if residual > 1e-8 {
        return Err(LinalgError::RiccatiNoConvergence);
    }
    Ok(p)
}
