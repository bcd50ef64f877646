//! Positivity machinery: Schur products, biprojections, convolution
//! operators, virtual normalizers and free/tensor separation.
//!
//! The coproduct of two positive elements is positive (the Schur product
//! theorem at the two-box level); a projection whose self-coproduct is
//! supported under itself is a biprojection; every element generates a
//! smallest biprojection; the operator norm of left convolution by a
//! positive element is `tr(A)/delta` and its top spectral projection is the
//! convolution image of the generated biprojection. A central minimal
//! projection of trace above one whose coproducts with the other minimal
//! projections all have rank one (a virtual normalizer) forces a separating
//! biprojection, the free-product split. All of this is implemented
//! numerically over the structure-constant model.

use thiserror::Error;

use crate::blocks::{
    self, block_decomposition_with, element_support, element_support_with, min_product_eigenvalue,
    rank_with,
};
use crate::linalg::{
    self, hermitian_eig, matrix_rank, operator_norm, rel_ok, spectral_projection_max, LinalgError,
    Mat, Tolerance, C64,
};
use crate::rng::SplitMix64;
use crate::structure::{Element, Frame, Structure, StructureError, StructureExt, TwoBoxStructure};

#[derive(Debug, Error)]
pub enum PositivityError {
    #[error("the element is not a projection")]
    NotAProjection,
    #[error("a proved identity fails on this input ({0}); it is not the two-box level of a subfactor planar algebra")]
    TheoremViolation(String),
    #[error("support iteration did not stabilize within the dimension bound")]
    NoStabilization,
    #[error("the element is not a central minimal projection")]
    NotCentralMinimal,
    #[error("the element is not a virtual normalizer")]
    NotVirtualNormalizer,
    #[error("biprojection enumeration inside nonabelian blocks is unsupported; central sums were tested")]
    UnsupportedNonCentralSearch,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type Result<T> = std::result::Result<T, PositivityError>;

/// A biprojection together with its trace.
#[derive(Debug, Clone)]
pub struct Biprojection {
    pub element: Element,
    pub trace: f64,
}

/// Left-convolution operator `x -> a * x` in an orthonormal basis of the
/// trace inner product, the concrete stand-in for the rotated picture of `a`
/// acting on the one-strand-added box space.
#[derive(Debug, Clone)]
pub struct ConvolutionOperator {
    pub matrix: Mat,
    /// Residual of `L_{a*b} = L_a L_b` over the basis.
    pub hom_residual: f64,
}

/// Coefficient-frame matrix of `x -> a * x`.
pub fn conv_left_matrix(s: &Structure, a: &[C64]) -> Mat {
    let n = s.dim();
    let table = s.coproduct_table();
    Mat::from_fn(n, n, |k, j| (0..n).map(|i| a[i] * table[i][j][k]).sum())
}

/// Coefficient-frame matrix of `x -> x * a`.
pub fn conv_right_matrix(s: &Structure, a: &[C64]) -> Mat {
    let n = s.dim();
    let table = s.coproduct_table();
    Mat::from_fn(n, n, |k, i| (0..n).map(|j| a[j] * table[i][j][k]).sum())
}

/// Left-convolution in the orthonormal frame.
pub fn conv_rep(s: &Structure, frame: &Frame, a: &Element) -> Mat {
    frame.orthonormalize(&conv_left_matrix(s, a.coeffs()))
}

pub fn convolution_operator(a: &Element, tol: &Tolerance) -> Result<ConvolutionOperator> {
    let s = a.owner();
    let frame = s.frame(tol)?;
    let matrix = conv_rep(s, &frame, a);
    let mut hom_residual = 0.0f64;
    for i in 0..s.dim() {
        let b = s.basis_element(i);
        let lhs = conv_rep(s, &frame, &a.coproduct(&b)?);
        let rhs = matrix.mul(&conv_rep(s, &frame, &b));
        hom_residual = hom_residual.max(lhs.sub(&rhs).frobenius() / (1.0 + rhs.frobenius()));
    }
    Ok(ConvolutionOperator { matrix, hom_residual })
}

/// Report of the Schur-positivity sampling.
#[derive(Debug, Clone)]
pub struct SchurReport {
    pub pairs_checked: usize,
    /// Most negative eigenvalue seen over all coproducts of positive pairs.
    pub min_eigenvalue: f64,
    /// Largest deviation of `tr(a*b)` from `tr(a) tr(b) / delta`.
    pub trace_residual: f64,
    pub pass: bool,
}

/// Coproducts of positive pairs stay positive: exhaustive over block-minimal
/// projections, then `trials` random positive pairs.
pub fn schur_product_check(s: &Structure, trials: usize, tol: &Tolerance) -> Result<SchurReport> {
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    let minimals = blocks.all_minimal_projections();
    let delta = s.delta();
    let mut min_eigenvalue = f64::INFINITY;
    let mut trace_residual = 0.0f64;
    let mut pairs_checked = 0usize;
    let mut check = |a: &Element, b: &Element| -> Result<()> {
        let ab = a.coproduct(b)?;
        min_eigenvalue = min_eigenvalue.min(min_product_eigenvalue(&ab, &frame, tol)?);
        let want = a.trace().re * b.trace().re / delta;
        trace_residual = trace_residual.max((ab.trace().re - want).abs() / (1.0 + want.abs()));
        if want <= 0.0 || ab.trace().re <= 0.0 {
            trace_residual = f64::INFINITY;
        }
        pairs_checked += 1;
        Ok(())
    };
    for a in &minimals {
        for b in &minimals {
            check(a, b)?;
        }
    }
    let mut rng = SplitMix64::new(0x5C0B_0002);
    for _ in 0..trials {
        let a = blocks::random_psd(s, &mut rng);
        let b = blocks::random_psd(s, &mut rng);
        check(&a, &b)?;
    }
    let pass = min_eigenvalue >= -tol.rank_tol && trace_residual <= tol.eq_tol;
    Ok(SchurReport { pairs_checked, min_eigenvalue, trace_residual, pass })
}

/// A projection `Q` is a biprojection exactly when `support(Q*Q)` lies under
/// `Q`. On a positive answer the derived identities are asserted:
/// `Q*Q = (tr Q / delta) Q`, `Q' = Q` and `e` under `Q`; their failure marks
/// the structure itself as inconsistent.
pub fn is_biprojection(q: &Element, tol: &Tolerance) -> Result<bool> {
    if !q.is_projection(tol) {
        return Err(PositivityError::NotAProjection);
    }
    let s = q.owner();
    let qq = q.coproduct(q)?;
    let supp = element_support(&qq, tol)?;
    if !q.mul(&supp)?.approx_eq(&supp, tol) {
        return Ok(false);
    }
    let scaled = q.scale_re(q.trace().re / s.delta());
    if !qq.approx_eq(&scaled, tol) {
        return Err(PositivityError::TheoremViolation(
            "Q*Q is supported under Q but is not (tr Q/delta) Q".into(),
        ));
    }
    if !q.contragredient().approx_eq(q, tol) {
        return Err(PositivityError::TheoremViolation(
            "biprojection is not self-contragredient".into(),
        ));
    }
    let e = s.jones();
    if !q.mul(&e)?.approx_eq(&e, tol) {
        return Err(PositivityError::TheoremViolation(
            "biprojection does not dominate the Jones projection".into(),
        ));
    }
    Ok(true)
}

/// Sums of central minimal projections that contain the Jones block and pass
/// the biprojection test, sorted by trace. This is the complete answer for an
/// abelian structure and the central part of the answer otherwise.
pub fn enumerate_central_biprojections(
    s: &Structure,
    tol: &Tolerance,
) -> Result<Vec<Biprojection>> {
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    let e_block = blocks
        .jones_block(s, tol)
        .ok_or_else(|| PositivityError::Precondition("no block contains e".into()))?;
    let others: Vec<usize> =
        (0..blocks.central_idempotents.len()).filter(|&i| i != e_block).collect();
    let mut found = Vec::new();
    for mask in 0u64..(1u64 << others.len()) {
        let mut q = blocks.central_idempotents[e_block].clone();
        for (bit, &i) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                q = q.add(&blocks.central_idempotents[i])?;
            }
        }
        if is_biprojection(&q, tol)? {
            let trace = q.trace().re;
            found.push(Biprojection { element: q, trace });
        }
    }
    found.sort_by(|a, b| {
        a.trace.partial_cmp(&b.trace).unwrap().then_with(|| {
            let ka: Vec<i64> =
                a.element.coeffs().iter().map(|z| (z.re / tol.eq_tol).round() as i64).collect();
            let kb: Vec<i64> =
                b.element.coeffs().iter().map(|z| (z.re / tol.eq_tol).round() as i64).collect();
            ka.cmp(&kb)
        })
    });
    Ok(found)
}

/// Full biprojection enumeration. For an abelian product algebra every
/// biprojection is a sum of minimal projections containing `e`, so the
/// central search is exhaustive; with a nonabelian block present the
/// non-central part of the lattice is out of reach and the call refuses
/// rather than silently truncating.
pub fn enumerate_biprojections(s: &Structure, tol: &Tolerance) -> Result<Vec<Biprojection>> {
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    if !blocks.is_abelian() {
        return Err(PositivityError::UnsupportedNonCentralSearch);
    }
    enumerate_central_biprojections(s, tol)
}

/// The smallest biprojection `P` with `P y P = y`: seed with
/// `e + y^* y + y y^*` and grow the support under coproduct with the seed
/// until it stabilizes.
pub fn generated_biprojection(y: &Element, tol: &Tolerance) -> Result<Biprojection> {
    let s = y.owner();
    let frame = s.frame(tol)?;
    let e = s.jones();
    let seed = e.add(&y.adjoint().mul(y)?)?.add(&y.mul(&y.adjoint())?)?;
    let mut current = element_support_with(&seed, &frame, tol)?;
    let mut stabilized = false;
    // the support can only grow, so dim iterations are enough
    for _ in 0..s.dim() {
        let grown = current.coproduct(&seed)?.add(&current)?;
        let next = element_support_with(&grown, &frame, tol)?;
        if next.approx_eq(&current, tol) {
            stabilized = true;
            break;
        }
        current = next;
    }
    if !stabilized {
        return Err(PositivityError::NoStabilization);
    }
    match is_biprojection(&current, tol) {
        Ok(true) => {}
        Ok(false) => {
            return Err(PositivityError::TheoremViolation(
                "stabilized support is not a biprojection".into(),
            ))
        }
        Err(e) => return Err(e),
    }
    let trace = current.trace().re;
    Ok(Biprojection { element: current, trace })
}

/// Operator norm of left convolution by a positive element, asserted to be
/// `tr(A)/delta`.
pub fn norm_check(a: &Element, tol: &Tolerance) -> Result<f64> {
    let s = a.owner();
    let frame = s.frame(tol)?;
    if !blocks::is_psd(a, &frame, tol)? {
        return Err(PositivityError::Precondition("norm_check needs a positive element".into()));
    }
    let l = conv_rep(s, &frame, a);
    let norm = operator_norm(&l, tol)?;
    let want = a.trace().re / s.delta();
    if !rel_ok((norm - want).abs(), want.abs(), tol.eq_tol) {
        return Err(PositivityError::TheoremViolation(format!(
            "|L_A| = {norm} but tr(A)/delta = {want}"
        )));
    }
    Ok(norm)
}

/// Distance between the top spectral projection of `L_{A+A'}` and the
/// convolution image of `(delta/tr P) P` for `P` the biprojection generated
/// by `A`. The two must agree; the Frobenius distance is returned.
pub fn spectral_biprojection_check(a: &Element, tol: &Tolerance) -> Result<f64> {
    let s = a.owner();
    let frame = s.frame(tol)?;
    if !blocks::is_psd(a, &frame, tol)? {
        return Err(PositivityError::Precondition(
            "spectral_biprojection_check needs a positive element".into(),
        ));
    }
    let p = generated_biprojection(a, tol)?;
    let sym = a.add(&a.contragredient())?;
    let h = conv_rep(s, &frame, &sym);
    let top = spectral_projection_max(&h, tol)?;
    let image = conv_rep(s, &frame, &p.element.scale_re(s.delta() / p.trace));
    let distance = top.sub(&image).frobenius();
    if !rel_ok(distance, top.frobenius(), 100.0 * tol.eq_tol) {
        return Err(PositivityError::TheoremViolation(format!(
            "top spectral projection differs from the generated biprojection image by {distance:.3e}"
        )));
    }
    Ok(distance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Both,
}

fn check_central_minimal(p: &Element, tol: &Tolerance) -> Result<()> {
    if !p.is_projection(tol) {
        return Err(PositivityError::NotCentralMinimal);
    }
    let s = p.owner();
    for i in 0..s.dim() {
        let b = s.basis_element(i);
        if !p.mul(&b)?.approx_eq(&b.mul(p)?, tol) {
            return Err(PositivityError::NotCentralMinimal);
        }
        // minimality: p b p is a multiple of p
        let pbp = p.mul(&b)?.mul(p)?;
        let coeff = pbp.inner(p)? / p.inner(p)?;
        if !pbp.approx_eq(&p.scale(coeff), tol) && pbp.norm() > tol.eq_tol * (1.0 + p.norm()) {
            return Err(PositivityError::NotCentralMinimal);
        }
    }
    Ok(())
}

/// Central minimal projection of trace above one whose coproduct with every
/// other block-minimal projection has rank one.
pub fn is_virtual_normalizer(p: &Element, side: Side, tol: &Tolerance) -> Result<bool> {
    check_central_minimal(p, tol)?;
    let s = p.owner();
    if p.trace().re <= 1.0 + tol.eq_tol {
        return Ok(false);
    }
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    let pc = p.contragredient();
    for q in blocks.all_minimal_projections() {
        if q.approx_eq(&pc, tol) {
            continue;
        }
        if matches!(side, Side::Left | Side::Both) {
            let r = rank_with(&p.coproduct(&q)?, &frame, &blocks, tol)?;
            if r != 1 {
                return Ok(false);
            }
        }
        if matches!(side, Side::Right | Side::Both) {
            let r = rank_with(&q.coproduct(p)?, &frame, &blocks, tol)?;
            if r != 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// For a virtual normalizer `P`, produce a biprojection separating the
/// structure as a free product: `e + P` when `support(P'*P)` lies under
/// `e + P'`, otherwise the support of `(id-P')(P'*P)(id-P')`.
pub fn find_separating_biprojection(p: &Element, tol: &Tolerance) -> Result<Biprojection> {
    let s = p.owner();
    if s.dim() < 3 {
        return Err(PositivityError::Precondition(
            "separation needs at least three dimensions".into(),
        ));
    }
    if !is_virtual_normalizer(p, Side::Both, tol)? {
        return Err(PositivityError::NotVirtualNormalizer);
    }
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    let e = s.jones();
    let id = s.unit();
    let pc = p.contragredient();
    let mix = pc.coproduct(p)?;
    let supp = element_support_with(&mix, &frame, tol)?;
    let small = e.add(&pc)?;
    let candidate = if small.mul(&supp)?.approx_eq(&supp, tol) {
        e.add(p)?
    } else {
        let off = id.sub(&pc)?;
        let compressed = off.mul(&mix)?.mul(&off)?;
        element_support_with(&compressed, &frame, tol)?
    };
    match is_biprojection(&candidate, tol) {
        Ok(true) => {}
        _ => {
            return Err(PositivityError::TheoremViolation(
                "separating candidate is not a biprojection".into(),
            ))
        }
    }
    let trace = candidate.trace().re;
    let delta = s.delta();
    if trace <= 1.0 + tol.eq_tol || trace >= delta * delta - tol.eq_tol {
        return Err(PositivityError::TheoremViolation(
            "separating biprojection is trivial".into(),
        ));
    }
    // every block-minimal projection is either fixed by the candidate cut-down
    // or rank-stable under its coproduct sandwich
    let kappa = (trace / delta) * (trace / delta);
    for r in blocks.all_minimal_projections() {
        let fixed = candidate.mul(&r)?.mul(&candidate)?.approx_eq(&r, tol);
        let sandwich = candidate.coproduct(&r)?.coproduct(&candidate)?;
        let stable = sandwich.approx_eq(&r.scale_re(kappa), tol);
        if !fixed && !stable {
            return Err(PositivityError::TheoremViolation(
                "a minimal projection is neither under the separator nor coproduct-stable".into(),
            ));
        }
    }
    Ok(Biprojection { element: candidate, trace })
}

/// Orthonormal basis (standard inner product on coefficients) of the null
/// space of `op - lambda I`.
fn fixed_space(op: &Mat, lambda: f64, tol: &Tolerance) -> Result<Vec<Vec<C64>>> {
    let n = op.rows();
    let shifted = op.sub(&Mat::identity(n).scale(C64::new(lambda, 0.0)));
    let gram = shifted.dagger().mul(&shifted);
    let eig = hermitian_eig(&gram, tol)?;
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(1.0);
    let floor = tol.rank_tol * max;
    let mut basis = Vec::new();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() <= floor {
            basis.push(eig.eigenvectors.col(j));
        }
    }
    Ok(basis)
}

/// Coefficient basis of `{x : QxQ = x}`.
pub fn product_corner_space(q: &Element, tol: &Tolerance) -> Result<Vec<Vec<C64>>> {
    let s = q.owner();
    let op = blocks::left_mult_matrix(s, q.coeffs()).mul(&blocks::right_mult_matrix(s, q.coeffs()));
    fixed_space(&op, 1.0, tol)
}

/// Coefficient basis of `{x : Q*x*Q = (tr Q / delta)^2 x}`.
pub fn coproduct_corner_space(q: &Element, tol: &Tolerance) -> Result<Vec<Vec<C64>>> {
    let s = q.owner();
    let kappa = (q.trace().re / s.delta()).powi(2);
    let op = conv_left_matrix(s, q.coeffs()).mul(&conv_right_matrix(s, q.coeffs()));
    fixed_space(&op, kappa, tol)
}

/// A biprojection `Q` separates the structure as a free product when the
/// fixed space of `x -> QxQ` together with the `(tr Q/delta)^2` eigenspace of
/// `x -> Q*x*Q` spans everything.
pub fn is_free_separating(q: &Biprojection, tol: &Tolerance) -> Result<bool> {
    let s = q.element.owner();
    let under = product_corner_space(&q.element, tol)?;
    let over = coproduct_corner_space(&q.element, tol)?;
    let mut cols = under;
    cols.extend(over);
    if cols.is_empty() {
        return Ok(false);
    }
    let joint = Mat::from_cols(s.dim(), &cols);
    Ok(matrix_rank(&joint, tol)? == s.dim())
}

/// Grows a span under products and coproducts until it stabilizes; returns
/// its dimension.
fn generated_span_dim(s: &Structure, seed: &[Vec<C64>], tol: &Tolerance) -> Result<usize> {
    let n = s.dim();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let add = |basis: &mut Vec<Vec<C64>>, w: &[C64]| -> bool {
        // Gram-Schmidt against the current basis in the standard inner product
        let mut v: Vec<C64> = w.to_vec();
        for b in basis.iter() {
            let overlap: C64 = b.iter().zip(v.iter()).map(|(bi, vi)| bi.conj() * vi).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= overlap * bi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol.rank_tol * (1.0 + scale) {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
            true
        } else {
            false
        }
    };
    for w in seed {
        add(&mut basis, w);
    }
    loop {
        let snapshot = basis.clone();
        let mut grew = false;
        for x in &snapshot {
            for y in &snapshot {
                let ex = s.element(x.clone());
                let ey = s.element(y.clone());
                grew |= add(&mut basis, ex.mul(&ey)?.coeffs());
                grew |= add(&mut basis, ex.coproduct(&ey)?.coeffs());
                if basis.len() == n {
                    return Ok(n);
                }
            }
        }
        if !grew {
            return Ok(basis.len());
        }
    }
}

/// Two biprojections separate the structure as a tensor product when both
/// are nontrivial, `AB = e`, `A*B = id/delta`, each side coproduct-commutes
/// with the other's corner, and the two corners generate everything.
pub fn is_tensor_separating(a: &Biprojection, b: &Biprojection, tol: &Tolerance) -> Result<bool> {
    let s = a.element.owner();
    if !a.element.same_owner(&b.element) {
        return Err(PositivityError::Structure(StructureError::OwnerMismatch));
    }
    // a split against a trivial factor is no split
    let d2 = s.delta() * s.delta();
    for t in [a.trace, b.trace] {
        if t <= 1.0 + tol.eq_tol || t >= d2 - tol.eq_tol {
            return Ok(false);
        }
    }
    let e = s.jones();
    let id = s.unit();
    if !a.element.mul(&b.element)?.approx_eq(&e, tol) {
        return Ok(false);
    }
    let want = id.scale_re(1.0 / s.delta());
    if !a.element.coproduct(&b.element)?.approx_eq(&want, tol) {
        return Ok(false);
    }
    let under_a = product_corner_space(&a.element, tol)?;
    let under_b = product_corner_space(&b.element, tol)?;
    for x in &under_a {
        let ex = s.element(x.clone());
        if !ex.coproduct(&b.element)?.approx_eq(&b.element.coproduct(&ex)?, tol) {
            return Ok(false);
        }
    }
    for y in &under_b {
        let ey = s.element(y.clone());
        if !ey.coproduct(&a.element)?.approx_eq(&a.element.coproduct(&ey)?, tol) {
            return Ok(false);
        }
    }
    let mut seed = under_a;
    seed.extend(under_b);
    Ok(generated_span_dim(s, &seed, tol)? == s.dim())
}

/// Turns a spanning set into a deterministic self-adjoint basis (the corner
/// spaces are adjoint-closed, and a self-adjoint basis keeps the restricted
/// trace vector real).
fn self_adjoint_basis(
    s: &Structure,
    vectors: &[Vec<C64>],
    tol: &Tolerance,
) -> Result<Vec<Vec<C64>>> {
    let mut candidates: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let x = s.element(v.clone());
        let sym = x.add(&x.adjoint())?.scale_re(0.5);
        let skew = x.sub(&x.adjoint())?.scale(C64::new(0.0, 0.5));
        candidates.push(sym.coeffs().to_vec());
        candidates.push(skew.coeffs().to_vec());
    }
    let mut kept: Vec<Vec<C64>> = Vec::new();
    for c in candidates {
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= tol.rank_tol {
            continue;
        }
        let mut cols = kept.clone();
        cols.push(c.clone());
        let m = Mat::from_cols(s.dim(), &cols);
        if matrix_rank(&m, tol)? == cols.len() {
            kept.push(c);
        }
        if kept.len() == vectors.len() {
            break;
        }
    }
    Ok(kept)
}

/// Builds a sub-structure on a subspace of a parent structure: products are
/// restricted, coproducts and traces rescaled, and every operation must stay
/// inside the span.
#[allow(clippy::too_many_arguments)]
fn substructure(
    parent: &Structure,
    basis: &[Vec<C64>],
    name: String,
    delta_new: f64,
    coproduct_scale: f64,
    trace_scale: f64,
    unit_new: &Element,
    jones_new: &Element,
    tol: &Tolerance,
) -> Result<Structure> {
    let m = basis.len();
    let v = Mat::from_cols(parent.dim(), basis);
    let express = |w: &[C64]| -> Result<Vec<C64>> {
        let (x, residual) = linalg::least_squares(&v, w, tol)?;
        let scale = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !rel_ok(residual, scale, tol.eq_tol) {
            return Err(PositivityError::TheoremViolation(format!(
                "cut-down operation leaves the corner span (residual {residual:.3e})"
            )));
        }
        Ok(x)
    };
    let elems: Vec<Element> = basis.iter().map(|c| parent.element(c.clone())).collect();
    let mut product = vec![vec![vec![C64::new(0.0, 0.0); m]; m]; m];
    let mut coproduct = vec![vec![vec![C64::new(0.0, 0.0); m]; m]; m];
    for i in 0..m {
        for j in 0..m {
            product[i][j] = express(elems[i].mul(&elems[j])?.coeffs())?;
            let scaled = elems[i].coproduct(&elems[j])?.scale_re(coproduct_scale);
            coproduct[i][j] = express(scaled.coeffs())?;
        }
    }
    let mut trace = Vec::with_capacity(m);
    for el in &elems {
        let t = el.trace();
        if t.im.abs() > tol.eq_tol * (1.0 + t.norm()) {
            return Err(PositivityError::TheoremViolation("cut-down trace is not real".into()));
        }
        trace.push(t.re * trace_scale);
    }
    let mut contragredient = Mat::zeros(m, m);
    let mut adjoint = Mat::zeros(m, m);
    for j in 0..m {
        let cg = express(elems[j].contragredient().coeffs())?;
        let ad = express(elems[j].adjoint().coeffs())?;
        for i in 0..m {
            contragredient[(i, j)] = cg[i];
            adjoint[(i, j)] = ad[i];
        }
    }
    let unit = express(unit_new.coeffs())?;
    let jones = express(jones_new.coeffs())?;
    let labels = (0..m).map(|i| format!("c{i}")).collect();
    let s = TwoBoxStructure::new(
        name,
        labels,
        delta_new,
        product,
        coproduct,
        trace,
        contragredient,
        adjoint,
        unit,
        jones,
    )
    .map_err(PositivityError::Structure)?;
    Ok(s)
}

/// The two cut-down structures attached to a biprojection `Q`: the corner
/// `{x : QxQ = x}` with loop value `sqrt(tr Q)` and the convolution corner
/// `{x : Q*x*Q = (tr Q/delta)^2 x}` with loop value `delta / sqrt(tr Q)`.
pub fn biprojection_cutdowns(q: &Biprojection, tol: &Tolerance) -> Result<(Structure, Structure)> {
    let s = q.element.owner();
    let delta = s.delta();
    let delta_under = q.trace.sqrt();
    let delta_over = delta / delta_under;

    let under_raw = product_corner_space(&q.element, tol)?;
    let under_basis = self_adjoint_basis(s, &under_raw, tol)?;
    if under_basis.len() != under_raw.len() {
        return Err(PositivityError::TheoremViolation(
            "corner space is not adjoint-closed".into(),
        ));
    }
    let under = substructure(
        s,
        &under_basis,
        format!("under({}, tr={:.6})", s.name(), q.trace),
        delta_under,
        delta / delta_under,
        1.0,
        &q.element,
        &s.jones(),
        tol,
    )?;

    let over_raw = coproduct_corner_space(&q.element, tol)?;
    let over_basis = self_adjoint_basis(s, &over_raw, tol)?;
    if over_basis.len() != over_raw.len() {
        return Err(PositivityError::TheoremViolation(
            "convolution corner is not adjoint-closed".into(),
        ));
    }
    let over = substructure(
        s,
        &over_basis,
        format!("over({}, tr={:.6})", s.name(), q.trace),
        delta_over,
        1.0 / delta_under,
        1.0 / q.trace,
        &s.unit(),
        &q.element,
        tol,
    )?;
    Ok((under, over))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, GroupPresentation};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn trivial_biprojections() {
        for s in [
            catalog::temperley_lieb(2.0).unwrap(),
            catalog::group(&GroupPresentation::cyclic(4)).unwrap(),
            catalog::subgroup_2p2(7).unwrap(),
        ] {
            assert!(is_biprojection(&s.jones(), &tol()).unwrap());
            assert!(is_biprojection(&s.unit(), &tol()).unwrap());
        }
    }

    #[test]
    fn z4_subgroup_biprojection() {
        // the order-2 subgroup {0,2} of Z4 gives e + P2
        let s = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        let q = s.jones().add(&s.basis_element(2)).unwrap();
        // brute-force oracle: (e+P2)*(e+P2) is proportional to e+P2
        let qq = q.coproduct(&q).unwrap();
        assert!(qq.approx_eq(&q.scale_re(q.trace().re / s.delta()), &tol()));
        assert!(is_biprojection(&q, &tol()).unwrap());
        // e + P1 is not one
        let bad = s.jones().add(&s.basis_element(1)).unwrap();
        assert!(!is_biprojection(&bad, &tol()).unwrap());
    }

    #[test]
    fn subgroup_7_has_no_intermediate() {
        let s = catalog::subgroup_2p2(7).unwrap();
        // e + g1 fails: g1*g1 has a g2 component
        let q = s.jones().add(&s.basis_element(1)).unwrap();
        assert!(!is_biprojection(&q, &tol()).unwrap());
        let list = enumerate_biprojections(&s, &tol()).unwrap();
        assert_eq!(list.len(), 2);
        assert!((list[0].trace - 1.0).abs() < 1e-9);
        assert!((list[1].trace - 7.0).abs() < 1e-9);
    }

    #[test]
    fn biprojection_counts_from_subgroup_lattices() {
        let z4 = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        let traces: Vec<f64> =
            enumerate_biprojections(&z4, &tol()).unwrap().iter().map(|b| b.trace).collect();
        assert_eq!(traces.len(), 3);
        assert!((traces[0] - 1.0).abs() < 1e-9);
        assert!((traces[1] - 2.0).abs() < 1e-9);
        assert!((traces[2] - 4.0).abs() < 1e-9);

        let klein = catalog::group(&GroupPresentation::direct_product(
            &GroupPresentation::cyclic(2),
            &GroupPresentation::cyclic(2),
        ))
        .unwrap();
        assert_eq!(enumerate_biprojections(&klein, &tol()).unwrap().len(), 5);
    }

    #[test]
    fn generated_biprojection_examples() {
        let t = tol();
        let z4 = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        // e generates itself
        let gen_e = generated_biprojection(&z4.jones(), &t).unwrap();
        assert!(gen_e.element.approx_eq(&z4.jones(), &t));
        // the order-2 element generates the subgroup {0,2}
        let gen_p2 = generated_biprojection(&z4.basis_element(2), &t).unwrap();
        let want = z4.jones().add(&z4.basis_element(2)).unwrap();
        assert!(gen_p2.element.approx_eq(&want, &t));
        // g1 generates everything in the subgroup structure
        for p in [5u64, 7] {
            let s = catalog::subgroup_2p2(p).unwrap();
            let gen = generated_biprojection(&s.basis_element(1), &t).unwrap();
            assert!(gen.element.approx_eq(&s.unit(), &t), "p={p}");
        }
    }

    #[test]
    fn norm_law_small_cases() {
        let t = tol();
        let tl = catalog::temperley_lieb(2.0).unwrap();
        let n_e = norm_check(&tl.jones(), &t).unwrap();
        assert!((n_e - 1.0 / 2.0).abs() < 1e-10);
        let n_id = norm_check(&tl.unit(), &t).unwrap();
        assert!((n_id - 2.0).abs() < 1e-10);
        let s7 = catalog::subgroup_2p2(7).unwrap();
        let n_g1 = norm_check(&s7.basis_element(1), &t).unwrap();
        assert!((n_g1 - 2.0 / 7.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn convolution_operator_laws() {
        let t = tol();
        let s = catalog::subgroup_2p2(7).unwrap();
        // delta e maps to the identity operator
        let de = s.jones().scale_re(s.delta());
        let op = convolution_operator(&de, &t).unwrap();
        assert!(op.matrix.sub(&Mat::identity(4)).frobenius() < 1e-10);
        assert!(op.hom_residual < 1e-10);
        let g1 = convolution_operator(&s.basis_element(1), &t).unwrap();
        let norm = operator_norm(&g1.matrix, &t).unwrap();
        assert!((norm - 2.0 / 7.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn virtual_normalizer_examples() {
        let t = tol();
        // the complement of e in TL (vacuously, no other minimal projection)
        let tl = catalog::temperley_lieb(2.0).unwrap();
        let f = tl.unit().sub(&tl.jones()).unwrap();
        assert!(is_virtual_normalizer(&f, Side::Both, &t).unwrap());
        // g1 in the p=7 family is not one: rank(g1*g2) = 2
        let s7 = catalog::subgroup_2p2(7).unwrap();
        assert!(!is_virtual_normalizer(&s7.basis_element(1), Side::Both, &t).unwrap());
        let r = crate::blocks::rank(
            &s7.basis_element(1).coproduct(&s7.basis_element(2)).unwrap(),
            &t,
        )
        .unwrap();
        assert_eq!(r, 2);
        // group minimal projections have trace 1
        let z4 = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        assert!(!is_virtual_normalizer(&z4.basis_element(1), Side::Both, &t).unwrap());
    }

    #[test]
    fn free_product_separation_round_trip() {
        let t = tol();
        let z2 = catalog::group(&GroupPresentation::cyclic(2)).unwrap();
        let z2b = catalog::group(&GroupPresentation::cyclic(2)).unwrap();
        let fp = catalog::free_product(&z2, &z2b, &t).unwrap();
        assert_eq!(fp.dim(), 3);
        // the B-side minimal projection id(x)h has trace 2 and is a VN
        let vn = fp.basis_element(2);
        assert!((vn.trace().re - 2.0).abs() < 1e-9);
        assert!(is_virtual_normalizer(&vn, Side::Both, &t).unwrap());
        let q = find_separating_biprojection(&vn, &t).unwrap();
        // the separator is id (x) e of trace delta_A^2 = 2
        assert!((q.trace - 2.0).abs() < 1e-9);
        assert!(is_free_separating(&q, &t).unwrap());
        let (under, over) = biprojection_cutdowns(&q, &t).unwrap();
        assert_eq!(under.dim(), 2);
        assert_eq!(over.dim(), 2);
        let ru = crate::axioms::verify_axioms(&under, &t);
        assert!(ru.pass, "under cutdown fails: {:?}", ru.failures());
        let ro = crate::axioms::verify_axioms(&over, &t);
        assert!(ro.pass, "over cutdown fails: {:?}", ro.failures());
    }

    #[test]
    fn fuss_catalan_jones_wenzl_side_is_a_virtual_normalizer() {
        // in TL(2) * TL(1.5) the first-factor complement projection
        // (id-e)(x)e is a virtual normalizer at generic loop values
        let t = tol();
        let tl_a = catalog::temperley_lieb(2.0).unwrap();
        let tl_b = catalog::temperley_lieb(1.5).unwrap();
        let fc = catalog::free_product(&tl_a, &tl_b, &t).unwrap();
        let p = fc.basis_element(1).sub(&fc.basis_element(0)).unwrap();
        assert!((p.trace().re - 3.0).abs() < 1e-9);
        assert!(is_virtual_normalizer(&p, Side::Both, &t).unwrap());
        let q = find_separating_biprojection(&p, &t).unwrap();
        assert!(is_free_separating(&q, &t).unwrap());
    }

    #[test]
    fn case_one_separator_in_tl_free_z2() {
        let t = tol();
        let tl = catalog::temperley_lieb(2.0).unwrap();
        let z2 = catalog::group(&GroupPresentation::cyclic(2)).unwrap();
        let fp = catalog::free_product(&tl, &z2, &t).unwrap();
        // the TL-side complement projection (id-e)(x)e is self-contragredient
        // with support(P*P) under e+P, triggering the e+P branch; over the
        // separated basis {e(x)e, id(x)e, id(x)h} it is the difference of the
        // first two vectors
        let p = fp.basis_element(1).sub(&fp.basis_element(0)).unwrap();
        assert!(p.is_projection(&t));
        assert!(is_virtual_normalizer(&p, Side::Both, &t).unwrap());
        let q = find_separating_biprojection(&p, &t).unwrap();
        let want = fp.jones().add(&p).unwrap();
        assert!(q.element.approx_eq(&want, &t));
        assert!((q.trace - 4.0).abs() < 1e-9);
        assert!(is_free_separating(&q, &t).unwrap());
    }

    #[test]
    fn separation_requires_a_virtual_normalizer() {
        let t = tol();
        let s7 = catalog::subgroup_2p2(7).unwrap();
        let err = find_separating_biprojection(&s7.basis_element(1), &t).unwrap_err();
        assert!(matches!(err, PositivityError::NotVirtualNormalizer));
    }

    #[test]
    fn free_separation_trivia() {
        let t = tol();
        let z4 = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        // id separates trivially: its corner is everything
        let id = Biprojection { element: z4.unit(), trace: 4.0 };
        assert!(is_free_separating(&id, &t).unwrap());
        // e + P2 does not: the joint span misses a dimension
        let q = z4.jones().add(&z4.basis_element(2)).unwrap();
        let q = Biprojection { element: q, trace: 2.0 };
        assert!(!is_free_separating(&q, &t).unwrap());
    }

    #[test]
    fn tensor_separation() {
        let t = tol();
        let z2 = catalog::group(&GroupPresentation::cyclic(2)).unwrap();
        let tl = catalog::temperley_lieb(2.0).unwrap();
        let tp = catalog::tensor_product(&z2, &tl).unwrap();
        let list = enumerate_biprojections(&tp, &t).unwrap();
        // id(x)e and e(x)id are both there
        let a = list.iter().find(|b| (b.trace - 2.0).abs() < 1e-9).unwrap();
        let b = list.iter().find(|b| (b.trace - 4.0).abs() < 1e-9).unwrap();
        assert!(is_tensor_separating(a, b, &t).unwrap());
        // e with itself never separates a nontrivial structure
        let e = Biprojection { element: tp.jones(), trace: 1.0 };
        assert!(!is_tensor_separating(&e, &e, &t).unwrap());
        // no pair separates the subgroup structure
        let s7 = catalog::subgroup_2p2(7).unwrap();
        let bips = enumerate_biprojections(&s7, &t).unwrap();
        for x in &bips {
            for y in &bips {
                assert!(!is_tensor_separating(x, y, &t).unwrap());
            }
        }
    }

    #[test]
    fn schur_check_on_catalog() {
        let t = tol();
        for s in [
            catalog::temperley_lieb(2.0).unwrap(),
            catalog::group(&GroupPresentation::cyclic(4)).unwrap(),
            catalog::subgroup_2p2(5).unwrap(),
        ] {
            let report = schur_product_check(&s, 50, &t).unwrap();
            assert!(report.pass, "Schur fails on {} ({report:?})", s.name());
        }
    }

    #[test]
    fn spectral_projection_theorem_small() {
        let t = tol();
        let z4 = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
        // A = P2 generates e+P2; the top eigenspace of L_{A+A'} is rank 2
        let d = spectral_biprojection_check(&z4.basis_element(2), &t).unwrap();
        assert!(d < 1e-9);
        let s7 = catalog::subgroup_2p2(7).unwrap();
        let d = spectral_biprojection_check(&s7.basis_element(1), &t).unwrap();
        assert!(d < 1e-9);
        let d = spectral_biprojection_check(&s7.jones(), &t).unwrap();
        assert!(d < 1e-9);
    }
}
