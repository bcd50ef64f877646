//! The two-box structure data model.
//!
//! A `TwoBoxStructure` stores the full structure constants of a basis of
//! two-boxes: the product and the one-string coproduct (each an `n x n` table
//! of coefficient vectors), the Markov trace on the basis, the contragredient
//! (a linear map, stored as a matrix on coefficients), the adjoint (a
//! conjugate-linear map, stored as the matrix applied to the conjugated
//! coefficient vector), the loop value `delta`, and the two distinguished
//! elements: the product unit `id` and the Jones projection `e`.
//!
//! Structures are immutable after construction and shared behind `Arc`;
//! `Element` values carry their owner and refuse to mix across structures.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{psd_sqrt_pair, rel_ok, LinalgError, Mat, Tolerance, C64};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("elements belong to different structures")]
    OwnerMismatch,
    #[error("loop value delta={0} rejected: a nondegenerate structure needs delta > 1")]
    BadDelta(f64),
    #[error("malformed structure data: {0}")]
    Shape(String),
    #[error("non-finite number in {0}")]
    NonFinite(String),
    #[error("numerically degenerate: {0}")]
    NumericallyDegenerate(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Shared handle to an immutable structure.
pub type Structure = Arc<TwoBoxStructure>;

#[derive(Debug)]
pub struct TwoBoxStructure {
    name: String,
    labels: Vec<String>,
    delta: f64,
    /// `product[i][j]` = coefficients of `b_i . b_j`.
    product: Vec<Vec<Vec<C64>>>,
    /// `coproduct[i][j]` = coefficients of `b_i * b_j`.
    coproduct: Vec<Vec<Vec<C64>>>,
    trace: Vec<f64>,
    /// Column `j` = coefficients of the contragredient of `b_j`.
    contragredient: Mat,
    /// Applied to the conjugated coefficient vector.
    adjoint: Mat,
    unit: Vec<C64>,
    jones: Vec<C64>,
}

impl TwoBoxStructure {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        labels: Vec<String>,
        delta: f64,
        product: Vec<Vec<Vec<C64>>>,
        coproduct: Vec<Vec<Vec<C64>>>,
        trace: Vec<f64>,
        contragredient: Mat,
        adjoint: Mat,
        unit: Vec<C64>,
        jones: Vec<C64>,
    ) -> Result<Structure, StructureError> {
        let name = name.into();
        let n = labels.len();
        if n == 0 {
            return Err(StructureError::Shape("empty basis".into()));
        }
        if !delta.is_finite() {
            return Err(StructureError::NonFinite("delta".into()));
        }
        if delta <= 1.0 {
            return Err(StructureError::BadDelta(delta));
        }
        let table_ok = |t: &Vec<Vec<Vec<C64>>>| {
            t.len() == n && t.iter().all(|r| r.len() == n && r.iter().all(|v| v.len() == n))
        };
        if !table_ok(&product) {
            return Err(StructureError::Shape("product table must be n x n x n".into()));
        }
        if !table_ok(&coproduct) {
            return Err(StructureError::Shape("coproduct table must be n x n x n".into()));
        }
        if trace.len() != n {
            return Err(StructureError::Shape("trace vector length must equal dim".into()));
        }
        if contragredient.rows() != n || contragredient.cols() != n {
            return Err(StructureError::Shape("contragredient matrix must be n x n".into()));
        }
        if adjoint.rows() != n || adjoint.cols() != n {
            return Err(StructureError::Shape("adjoint matrix must be n x n".into()));
        }
        if unit.len() != n || jones.len() != n {
            return Err(StructureError::Shape("unit and jones vectors must have length n".into()));
        }
        let finite_v = |v: &[C64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        for t in [&product, &coproduct] {
            if !t.iter().all(|r| r.iter().all(|v| finite_v(v))) {
                return Err(StructureError::NonFinite("structure constants".into()));
            }
        }
        if !trace.iter().all(|x| x.is_finite()) {
            return Err(StructureError::NonFinite("trace".into()));
        }
        if !contragredient.all_finite() || !adjoint.all_finite() {
            return Err(StructureError::NonFinite("contragredient/adjoint".into()));
        }
        if !finite_v(&unit) || !finite_v(&jones) {
            return Err(StructureError::NonFinite("unit/jones".into()));
        }
        Ok(Arc::new(TwoBoxStructure {
            name,
            labels,
            delta,
            product,
            coproduct,
            trace,
            contragredient,
            adjoint,
            unit,
            jones,
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace_vector(&self) -> &[f64] {
        &self.trace
    }

    pub fn product_table(&self) -> &Vec<Vec<Vec<C64>>> {
        &self.product
    }

    pub fn coproduct_table(&self) -> &Vec<Vec<Vec<C64>>> {
        &self.coproduct
    }

    pub fn contragredient_matrix(&self) -> &Mat {
        &self.contragredient
    }

    pub fn adjoint_matrix(&self) -> &Mat {
        &self.adjoint
    }

    pub fn unit_coeffs(&self) -> &[C64] {
        &self.unit
    }

    pub fn jones_coeffs(&self) -> &[C64] {
        &self.jones
    }
}

/// Element-building API; all elements remember their owning structure.
pub trait StructureExt {
    fn element(&self, coeffs: Vec<C64>) -> Element;
    fn element_real(&self, coeffs: &[f64]) -> Element;
    fn basis_element(&self, i: usize) -> Element;
    fn zero(&self) -> Element;
    fn unit(&self) -> Element;
    fn jones(&self) -> Element;
    fn gram(&self) -> Mat;
    fn frame(&self, tol: &Tolerance) -> Result<Frame, StructureError>;
}

impl StructureExt for Structure {
    fn element(&self, coeffs: Vec<C64>) -> Element {
        assert_eq!(coeffs.len(), self.dim(), "coefficient length mismatch");
        Element { owner: Arc::clone(self), coeffs }
    }

    fn element_real(&self, coeffs: &[f64]) -> Element {
        self.element(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    fn basis_element(&self, i: usize) -> Element {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.dim()];
        coeffs[i] = C64::new(1.0, 0.0);
        self.element(coeffs)
    }

    fn zero(&self) -> Element {
        self.element(vec![C64::new(0.0, 0.0); self.dim()])
    }

    fn unit(&self) -> Element {
        self.element(self.unit_coeffs().to_vec())
    }

    fn jones(&self) -> Element {
        self.element(self.jones_coeffs().to_vec())
    }

    /// Gram matrix of the trace form, `G[i][j] = tr(b_i^* b_j)`.
    fn gram(&self) -> Mat {
        let n = self.dim();
        let basis: Vec<Element> = (0..n).map(|i| self.basis_element(i)).collect();
        Mat::from_fn(n, n, |i, j| {
            basis[i].adjoint().mul(&basis[j]).expect("same owner").trace()
        })
    }

    /// Orthonormalization data for the trace inner product.
    fn frame(&self, tol: &Tolerance) -> Result<Frame, StructureError> {
        let gram = self.gram();
        if gram.hermitian_residual() > tol.eq_tol * (1.0 + gram.frobenius()) {
            return Err(StructureError::NumericallyDegenerate(
                "trace form is not Hermitian".into(),
            ));
        }
        let (sqrt, isqrt) = psd_sqrt_pair(&gram, tol).map_err(|_| {
            StructureError::NumericallyDegenerate("trace form is not positive definite".into())
        })?;
        Ok(Frame { gram, sqrt, isqrt })
    }
}

/// Gram matrix of the trace form together with its square root and inverse
/// square root. Conjugating a coefficient-frame operator by `sqrt`/`isqrt`
/// expresses it in an orthonormal basis of the trace inner product.
#[derive(Debug, Clone)]
pub struct Frame {
    pub gram: Mat,
    pub sqrt: Mat,
    pub isqrt: Mat,
}

impl Frame {
    /// Coefficient-frame operator -> orthonormal-frame operator.
    pub fn orthonormalize(&self, op: &Mat) -> Mat {
        self.sqrt.mul(op).mul(&self.isqrt)
    }

    /// Orthonormal-frame operator -> coefficient-frame operator.
    pub fn coefficientize(&self, op: &Mat) -> Mat {
        self.isqrt.mul(op).mul(&self.sqrt)
    }
}

/// A two-box: a coefficient vector over its owner's basis.
#[derive(Debug, Clone)]
pub struct Element {
    owner: Structure,
    coeffs: Vec<C64>,
}

impl Element {
    pub fn owner(&self) -> &Structure {
        &self.owner
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn same_owner(&self, other: &Element) -> bool {
        Arc::ptr_eq(&self.owner, &other.owner)
    }

    fn check_owner(&self, other: &Element) -> Result<(), StructureError> {
        if self.same_owner(other) {
            Ok(())
        } else {
            Err(StructureError::OwnerMismatch)
        }
    }

    /// Bilinear extension of the product table.
    pub fn mul(&self, other: &Element) -> Result<Element, StructureError> {
        self.check_owner(other)?;
        let n = self.coeffs.len();
        let table = self.owner.product_table();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let a = self.coeffs[i];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let w = a * other.coeffs[j];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for (k, out_k) in out.iter_mut().enumerate() {
                    *out_k += w * table[i][j][k];
                }
            }
        }
        Ok(self.owner.element(out))
    }

    /// Bilinear extension of the coproduct table.
    pub fn coproduct(&self, other: &Element) -> Result<Element, StructureError> {
        self.check_owner(other)?;
        let n = self.coeffs.len();
        let table = self.owner.coproduct_table();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let a = self.coeffs[i];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let w = a * other.coeffs[j];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for (k, out_k) in out.iter_mut().enumerate() {
                    *out_k += w * table[i][j][k];
                }
            }
        }
        Ok(self.owner.element(out))
    }

    /// Linear extension of the contragredient (half rotation).
    pub fn contragredient(&self) -> Element {
        self.owner.element(self.owner.contragredient_matrix().apply(&self.coeffs))
    }

    /// Conjugate-linear adjoint.
    pub fn adjoint(&self) -> Element {
        let conj: Vec<C64> = self.coeffs.iter().map(|z| z.conj()).collect();
        self.owner.element(self.owner.adjoint_matrix().apply(&conj))
    }

    /// Markov trace, extended linearly from the basis values.
    pub fn trace(&self) -> C64 {
        self.coeffs
            .iter()
            .zip(self.owner.trace_vector())
            .map(|(c, &t)| c * t)
            .sum()
    }

    pub fn add(&self, other: &Element) -> Result<Element, StructureError> {
        self.check_owner(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(self.owner.element(coeffs))
    }

    pub fn sub(&self, other: &Element) -> Result<Element, StructureError> {
        self.check_owner(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(self.owner.element(coeffs))
    }

    pub fn scale(&self, z: C64) -> Element {
        self.owner.element(self.coeffs.iter().map(|a| a * z).collect())
    }

    pub fn scale_re(&self, x: f64) -> Element {
        self.scale(C64::new(x, 0.0))
    }

    /// Trace-form inner product `<self, other> = tr(other^* self)`.
    pub fn inner(&self, other: &Element) -> Result<C64, StructureError> {
        Ok(other.adjoint().mul(self)?.trace())
    }

    /// Trace-form norm.
    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same owner").re.max(0.0).sqrt()
    }

    /// Relative trace-norm equality.
    pub fn approx_eq(&self, other: &Element, tol: &Tolerance) -> bool {
        match self.sub(other) {
            Ok(diff) => rel_ok(diff.norm(), self.norm().max(other.norm()), tol.eq_tol),
            Err(_) => false,
        }
    }

    pub fn is_zero(&self, tol: &Tolerance) -> bool {
        rel_ok(self.norm(), 0.0, tol.eq_tol)
    }

    /// Self-adjoint within tolerance.
    pub fn is_self_adjoint(&self, tol: &Tolerance) -> bool {
        self.approx_eq(&self.adjoint(), tol)
    }

    /// Projection within tolerance: self-adjoint and idempotent.
    pub fn is_projection(&self, tol: &Tolerance) -> bool {
        self.is_self_adjoint(tol)
            && self.mul(self).map(|sq| sq.approx_eq(self, tol)).unwrap_or(false)
    }
}
