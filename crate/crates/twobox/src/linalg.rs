//! Self-contained dense complex linear algebra.
//!
//! Everything downstream runs through this module: matrix arithmetic, a
//! cyclic-Jacobi Hermitian eigensolver, matrix rank, support and spectral
//! projections, and the uniform tolerance policy. Dimensions stay small
//! (a few dozen at most), so the Jacobi solver is preferred over an external
//! dependency: it converges quadratically and is exact on diagonal input.

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Maximum number of Jacobi sweeps before giving up.
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (asymmetry {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },
    #[error("Jacobi iteration cap of {MAX_SWEEPS} sweeps reached without convergence")]
    NoConvergence,
    #[error("matrix is numerically singular")]
    Singular,
}

/// Tolerance policy threaded through every module.
///
/// `eq_tol` gates relative equality of scalars and matrices, `rank_tol` gates
/// rank decisions and eigenvalue grouping, `roundtrip_tol` gates serialization
/// round trips.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub eq_tol: f64,
    pub rank_tol: f64,
    pub roundtrip_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eq_tol: 1e-9, rank_tol: 1e-8, roundtrip_tol: 1e-12 }
    }
}

impl Tolerance {
    /// Default policy with a custom equality tolerance.
    pub fn with_eq_tol(eq_tol: f64) -> Tolerance {
        Tolerance { eq_tol, ..Tolerance::default() }
    }

    pub fn is_valid(&self) -> bool {
        let floor = f64::EPSILON * 100.0;
        self.eq_tol >= floor
            && self.eq_tol.is_finite()
            && self.rank_tol > 0.0
            && self.rank_tol.is_finite()
            && self.roundtrip_tol > 0.0
            && self.roundtrip_tol.is_finite()
    }
}

/// Relative comparison of two nonnegative residual scales.
pub fn rel_ok(residual: f64, scale: f64, tol: f64) -> bool {
    residual <= tol * (1.0 + scale)
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Column matrix from a coefficient vector.
    pub fn from_col(v: &[C64]) -> Mat {
        let mut m = Mat::zeros(v.len(), 1);
        for (i, &z) in v.iter().enumerate() {
            m[(i, 0)] = z;
        }
        m
    }

    /// Stacks coefficient vectors as columns.
    pub fn from_cols(n: usize, cols: &[Vec<C64>]) -> Mat {
        let mut m = Mat::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n);
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, z: C64) -> Mat {
        let data = self.data.iter().map(|a| a * z).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Mat {
        let data = self.data.iter().map(|z| z.conj()).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of the anti-Hermitian part.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.sub(&self.dagger()).frobenius()
    }

    pub fn is_hermitian(&self, tol: &Tolerance) -> bool {
        self.is_square() && rel_ok(self.hermitian_residual(), self.frobenius(), tol.eq_tol)
    }

    fn hermitian_part(&self) -> Mat {
        self.add(&self.dagger()).scale(C64::new(0.5, 0.0))
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as the
/// columns of a unitary matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

impl HermitianEig {
    /// `U diag(lambda) U^*`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] = u[(i, j)] * self.eigenvalues[j];
            }
        }
        scaled.mul(&u.dagger())
    }
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
pub fn hermitian_eig(h: &Mat, tol: &Tolerance) -> Result<HermitianEig, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::NotSquare { rows: h.rows, cols: h.cols });
    }
    let residual = h.hermitian_residual();
    if !rel_ok(residual, h.frobenius(), tol.eq_tol) {
        return Err(LinalgError::NotHermitian { residual });
    }
    let n = h.rows;
    if n == 0 {
        return Ok(HermitianEig { eigenvalues: vec![], eigenvectors: Mat::zeros(0, 0) });
    }
    let mut a = h.hermitian_part();
    let mut v = Mat::identity(n);
    let scale = a.frobenius().max(1.0);
    let target = scale * f64::EPSILON * (n as f64);

    let off = |a: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= target;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= target / (n as f64 * n as f64).max(1.0) {
                    continue;
                }
                rotated = true;
                let alpha = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = I except U[p][p]=c, U[p][q]=s*alpha, U[q][p]=-s*conj(alpha), U[q][q]=c.
                let sa = alpha * s;
                // rows: row_p <- c*row_p - s*alpha*row_q ; row_q <- s*conj(alpha)*row_p + c*row_q
                for k in 0..n {
                    let hp = a[(p, k)];
                    let hq = a[(q, k)];
                    a[(p, k)] = hp * c - sa * hq;
                    a[(q, k)] = sa.conj() * hp + hq * c;
                }
                // cols: col_p <- c*col_p - s*conj(alpha)*col_q ; col_q <- s*alpha*col_p + c*col_q
                for k in 0..n {
                    let hp = a[(k, p)];
                    let hq = a[(k, q)];
                    a[(k, p)] = hp * c - sa.conj() * hq;
                    a[(k, q)] = sa * hp + hq * c;
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * c - sa.conj() * vq;
                    v[(k, q)] = sa * vp + vq * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
            }
        }
        if !rotated || off(&a) <= target {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Orthogonal projection onto the range of a positive semidefinite matrix.
///
/// Eigenvalues above `rank_tol * max(1, lambda_max)` count as the support.
pub fn support_projection(x: &Mat, tol: &Tolerance) -> Result<Mat, LinalgError> {
    let eig = hermitian_eig(x, tol)?;
    let n = eig.eigenvalues.len();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let min = eig.eigenvalues[0];
    let max = eig.eigenvalues[n - 1];
    let floor = tol.rank_tol * max.max(1.0);
    if min < -floor {
        return Err(LinalgError::NotPositive { min_eig: min });
    }
    projection_for(&eig, |lambda| lambda > floor)
}

/// Projection onto the eigenspace of the maximal eigenvalue, grouping the
/// eigenvalues within `rank_tol * (1 + |lambda_max|)` of the top.
pub fn spectral_projection_max(h: &Mat, tol: &Tolerance) -> Result<Mat, LinalgError> {
    let eig = hermitian_eig(h, tol)?;
    let n = eig.eigenvalues.len();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let max = eig.eigenvalues[n - 1];
    let gap = tol.rank_tol * (1.0 + max.abs());
    projection_for(&eig, |lambda| lambda >= max - gap)
}

fn projection_for(
    eig: &HermitianEig,
    mut keep: impl FnMut(f64) -> bool,
) -> Result<Mat, LinalgError> {
    let n = eig.eigenvalues.len();
    let mut p = Mat::zeros(n, n);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if !keep(lambda) {
            continue;
        }
        let col = eig.eigenvectors.col(j);
        for i in 0..n {
            for k in 0..n {
                p[(i, k)] += col[i] * col[k].conj();
            }
        }
    }
    Ok(p)
}

/// Rank by singular values: eigenvalues of `A^* A` above the relative floor.
pub fn matrix_rank(a: &Mat, tol: &Tolerance) -> Result<usize, LinalgError> {
    let gram = a.dagger().mul(a);
    let eig = hermitian_eig(&gram, tol)?;
    let n = eig.eigenvalues.len();
    if n == 0 {
        return Ok(0);
    }
    let smax = eig.eigenvalues[n - 1].max(0.0).sqrt();
    let floor = tol.rank_tol * smax.max(1.0);
    Ok(eig.eigenvalues.iter().filter(|&&l| l.max(0.0).sqrt() > floor).count())
}

/// Operator (spectral) norm.
pub fn operator_norm(a: &Mat, tol: &Tolerance) -> Result<f64, LinalgError> {
    let gram = a.dagger().mul(a);
    let eig = hermitian_eig(&gram, tol)?;
    Ok(eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Square root and inverse square root of a positive definite matrix.
pub fn psd_sqrt_pair(g: &Mat, tol: &Tolerance) -> Result<(Mat, Mat), LinalgError> {
    let eig = hermitian_eig(g, tol)?;
    let n = eig.eigenvalues.len();
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let floor = tol.rank_tol * max.max(1.0);
    if eig.eigenvalues.iter().any(|&l| l <= floor) {
        return Err(LinalgError::Singular);
    }
    let u = &eig.eigenvectors;
    let mut sqrt = Mat::zeros(n, n);
    let mut isqrt = Mat::zeros(n, n);
    for j in 0..n {
        let r = eig.eigenvalues[j].sqrt();
        let col = u.col(j);
        for i in 0..n {
            for k in 0..n {
                let w = col[i] * col[k].conj();
                sqrt[(i, k)] += w * r;
                isqrt[(i, k)] += w / r;
            }
        }
    }
    Ok((sqrt, isqrt))
}

/// Least-squares solution of `A x = b` through the normal equations with a
/// spectral pseudo-inverse. Returns the solution and the residual norm.
pub fn least_squares(a: &Mat, b: &[C64], tol: &Tolerance) -> Result<(Vec<C64>, f64), LinalgError> {
    assert_eq!(a.rows(), b.len());
    let gram = a.dagger().mul(a);
    let rhs = a.dagger().apply(b);
    let eig = hermitian_eig(&gram, tol)?;
    let m = eig.eigenvalues.len();
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let floor = tol.rank_tol * max.max(1.0);
    let u = &eig.eigenvectors;
    let mut x = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        let lambda = eig.eigenvalues[j];
        if lambda <= floor {
            continue;
        }
        let col = u.col(j);
        let coeff: C64 = col.iter().zip(&rhs).map(|(ci, ri)| ci.conj() * ri).sum();
        for i in 0..m {
            x[i] += col[i] * (coeff / lambda);
        }
    }
    let fit = a.apply(&x);
    let residual = fit
        .iter()
        .zip(b)
        .map(|(f, t)| (f - t).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((x, residual))
}

/// Groups ascending eigenvalues into clusters separated by more than `gap`.
pub fn cluster_eigenvalues(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > gap {
            clusters.push(start..i);
            start = i;
        }
    }
    clusters
}
