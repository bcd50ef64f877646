//! Block structure of the product algebra.
//!
//! The product algebra of a two-box structure is a finite-dimensional
//! C*-algebra; this module computes its minimal central idempotents (the
//! blocks), the matrix dimension of each block, minimal projections inside
//! each block, supports of positive elements, and the rank of a positive
//! element (the number of minimal projections in its spectral resolution).
//!
//! The workhorse is the left regular representation on the trace inner
//! product space: left multiplication by a self-adjoint element is a
//! Hermitian matrix in an orthonormal frame, and spectral projections of
//! that matrix, applied back to the identity element, are spectral
//! idempotents of the element itself.

use crate::linalg::{
    cluster_eigenvalues, hermitian_eig, matrix_rank, rel_ok, Mat, Tolerance, C64,
};
use crate::rng::SplitMix64;
use crate::structure::{Element, Frame, Structure, StructureError, StructureExt};

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    /// Minimal central idempotents, one per block.
    pub central_idempotents: Vec<Element>,
    /// Block `i` is isomorphic to `d_i x d_i` matrices.
    pub block_dims: Vec<usize>,
    /// Trace of a minimal projection in each block.
    pub block_traces: Vec<f64>,
    /// A maximal family of mutually orthogonal minimal projections per block.
    pub minimal_projections: Vec<Vec<Element>>,
}

impl BlockDecomposition {
    pub fn is_abelian(&self) -> bool {
        self.block_dims.iter().all(|&d| d == 1)
    }

    /// All minimal projections across blocks, block order.
    pub fn all_minimal_projections(&self) -> Vec<Element> {
        self.minimal_projections.iter().flatten().cloned().collect()
    }

    /// Index of the block containing the Jones projection.
    pub fn jones_block(&self, s: &Structure, tol: &Tolerance) -> Option<usize> {
        let e = s.jones();
        self.central_idempotents.iter().position(|z| {
            z.mul(&e).map(|p| p.approx_eq(&e, tol)).unwrap_or(false)
        })
    }
}

/// Matrix of left multiplication `x -> a x` on coefficient vectors.
pub fn left_mult_matrix(s: &Structure, a: &[C64]) -> Mat {
    let n = s.dim();
    let table = s.product_table();
    Mat::from_fn(n, n, |k, j| {
        (0..n).map(|i| a[i] * table[i][j][k]).sum()
    })
}

/// Matrix of right multiplication `x -> x a` on coefficient vectors.
pub fn right_mult_matrix(s: &Structure, a: &[C64]) -> Mat {
    let n = s.dim();
    let table = s.product_table();
    Mat::from_fn(n, n, |k, i| {
        (0..n).map(|j| a[j] * table[i][j][k]).sum()
    })
}

/// Left regular representation of an element in the orthonormal frame.
pub fn product_rep(s: &Structure, frame: &Frame, a: &Element) -> Mat {
    frame.orthonormalize(&left_mult_matrix(s, a.coeffs()))
}

/// Smallest eigenvalue of a self-adjoint element in the product algebra.
pub fn min_product_eigenvalue(
    x: &Element,
    frame: &Frame,
    tol: &Tolerance,
) -> Result<f64, StructureError> {
    let h = product_rep(x.owner(), frame, x);
    let eig = hermitian_eig(&h, tol)?;
    Ok(eig.eigenvalues.first().copied().unwrap_or(0.0))
}

/// Positive semidefinite in the product algebra, within `rank_tol`.
pub fn is_psd(x: &Element, frame: &Frame, tol: &Tolerance) -> Result<bool, StructureError> {
    if !x.is_self_adjoint(tol) {
        return Ok(false);
    }
    let min = min_product_eigenvalue(x, frame, tol)?;
    let h = product_rep(x.owner(), frame, x);
    let scale = h.frobenius().max(1.0);
    Ok(min >= -tol.rank_tol * scale)
}

/// Spectral idempotents of a self-adjoint element: eigenvalue clusters of the
/// regular representation, each mapped back to the algebra by applying the
/// spectral projection to the identity.
pub fn spectral_idempotents(
    x: &Element,
    frame: &Frame,
    tol: &Tolerance,
) -> Result<Vec<(f64, Element)>, StructureError> {
    let s = x.owner();
    let h = product_rep(s, frame, x);
    let eig = hermitian_eig(&h, tol)?;
    let n = s.dim();
    let max_abs = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()));
    let gap = tol.rank_tol * (1.0 + max_abs);
    let clusters = cluster_eigenvalues(&eig.eigenvalues, gap);
    let unit_coeffs: Vec<C64> = s.unit_coeffs().to_vec();
    let mut out = Vec::new();
    for range in clusters {
        let mean = eig.eigenvalues[range.clone()].iter().sum::<f64>() / range.len() as f64;
        let mut proj = Mat::zeros(n, n);
        for j in range {
            let col = eig.eigenvectors.col(j);
            for i in 0..n {
                for k in 0..n {
                    proj[(i, k)] += col[i] * col[k].conj();
                }
            }
        }
        let back = frame.coefficientize(&proj);
        out.push((mean, s.element(back.apply(&unit_coeffs))));
    }
    Ok(out)
}

/// Support projection of a positive element of the product algebra.
pub fn element_support(x: &Element, tol: &Tolerance) -> Result<Element, StructureError> {
    let s = x.owner();
    let frame = s.frame(tol)?;
    element_support_with(x, &frame, tol)
}

pub fn element_support_with(
    x: &Element,
    frame: &Frame,
    tol: &Tolerance,
) -> Result<Element, StructureError> {
    let idems = spectral_idempotents(x, frame, tol)?;
    let max = idems.iter().fold(0.0f64, |m, (l, _)| m.max(l.abs()));
    let floor = tol.rank_tol * max.max(1.0);
    if idems.iter().any(|(l, _)| *l < -floor) {
        return Err(StructureError::Linalg(crate::linalg::LinalgError::NotPositive {
            min_eig: idems.iter().map(|(l, _)| *l).fold(f64::INFINITY, f64::min),
        }));
    }
    let mut acc = x.owner().zero();
    for (lambda, p) in idems {
        if lambda > floor {
            acc = acc.add(&p)?;
        }
    }
    Ok(acc)
}

/// Support order `x` weaker-or-equal `y`: support(y) dominates support(x),
/// tested as `support(y) support(x) = support(x)`.
pub fn weaker_eq(x: &Element, y: &Element, tol: &Tolerance) -> Result<bool, StructureError> {
    let sx = element_support(x, tol)?;
    let sy = element_support(y, tol)?;
    Ok(sy.mul(&sx)?.approx_eq(&sx, tol))
}

fn generic_self_adjoint_combination(
    s: &Structure,
    vectors: &[Vec<C64>],
    rng: &mut SplitMix64,
) -> Element {
    let mut acc = s.zero();
    for v in vectors {
        let z = s.element(v.clone());
        let sym = z.add(&z.adjoint()).expect("same owner");
        let skew = z.sub(&z.adjoint()).expect("same owner").scale(C64::new(0.0, 1.0));
        acc = acc
            .add(&sym.scale_re(rng.symmetric()))
            .and_then(|a| a.add(&skew.scale_re(rng.symmetric())))
            .expect("same owner");
    }
    acc
}

/// Null space of the stacked commutator operators: coefficient vectors of
/// central elements.
fn center_basis(s: &Structure, tol: &Tolerance) -> Result<Vec<Vec<C64>>, StructureError> {
    let n = s.dim();
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        let b = s.basis_element(i);
        let comm = left_mult_matrix(s, b.coeffs()).sub(&right_mult_matrix(s, b.coeffs()));
        k = k.add(&comm.dagger().mul(&comm));
    }
    let eig = hermitian_eig(&k, tol)?;
    let max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(1.0);
    let floor = tol.rank_tol * max;
    let mut basis = Vec::new();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() <= floor {
            basis.push(eig.eigenvectors.col(j));
        }
    }
    if basis.is_empty() {
        return Err(StructureError::NumericallyDegenerate("empty center".into()));
    }
    Ok(basis)
}

/// Artin-Wedderburn data of the product algebra.
///
/// The center is diagonalized through a generic self-adjoint central element;
/// each eigenvalue cluster of its regular representation has size `d_i^2` and
/// yields one minimal central idempotent. Blocks are ordered with the Jones
/// block first, then by ascending idempotent trace, then by label order of
/// the dominating basis coefficient.
pub fn block_decomposition(
    s: &Structure,
    tol: &Tolerance,
) -> Result<BlockDecomposition, StructureError> {
    let frame = s.frame(tol)?;
    block_decomposition_with(s, &frame, tol)
}

pub fn block_decomposition_with(
    s: &Structure,
    frame: &Frame,
    tol: &Tolerance,
) -> Result<BlockDecomposition, StructureError> {
    let center = center_basis(s, tol)?;
    let expected_blocks = center.len();
    let mut rng = SplitMix64::new(0x7B0C_5EED);
    let mut attempt = 0;
    let (idempotents, dims) = loop {
        attempt += 1;
        if attempt > 8 {
            return Err(StructureError::NumericallyDegenerate(
                "could not separate the center spectrally".into(),
            ));
        }
        let z = generic_self_adjoint_combination(s, &center, &mut rng);
        let idems = spectral_idempotents(&z, frame, tol)?;
        if idems.len() != expected_blocks {
            continue;
        }
        let mut ok = true;
        let mut dims = Vec::new();
        let mut elems = Vec::new();
        for (_, p) in idems {
            if !p.is_projection(tol) {
                ok = false;
                break;
            }
            // block dim from the regular-rep rank d_i^2
            let rank2 = matrix_rank(&product_rep(s, frame, &p), tol)?;
            let d = (rank2 as f64).sqrt().round() as usize;
            if d * d != rank2 {
                ok = false;
                break;
            }
            dims.push(d);
            elems.push(p);
        }
        if ok {
            break (elems, dims);
        }
    };

    // the idempotents must be central, mutually orthogonal, and sum to id
    let mut total = s.zero();
    for p in &idempotents {
        total = total.add(p)?;
        for i in 0..s.dim() {
            let b = s.basis_element(i);
            if !p.mul(&b)?.approx_eq(&b.mul(p)?, tol) {
                return Err(StructureError::NumericallyDegenerate(
                    "a block idempotent is not central".into(),
                ));
            }
        }
    }
    for (i, p) in idempotents.iter().enumerate() {
        for q in idempotents.iter().skip(i + 1) {
            if !p.mul(q)?.is_zero(tol) {
                return Err(StructureError::NumericallyDegenerate(
                    "block idempotents are not orthogonal".into(),
                ));
            }
        }
    }
    if !total.approx_eq(&s.unit(), tol) {
        return Err(StructureError::NumericallyDegenerate(
            "central idempotents do not sum to the identity".into(),
        ));
    }
    if dims.iter().map(|d| d * d).sum::<usize>() != s.dim() {
        return Err(StructureError::NumericallyDegenerate(
            "block dimensions do not account for the algebra dimension".into(),
        ));
    }

    // minimal projections inside each block
    let mut minimal = Vec::new();
    for (p, &d) in idempotents.iter().zip(&dims) {
        if d == 1 {
            minimal.push(vec![p.clone()]);
            continue;
        }
        minimal.push(block_minimal_projections(s, frame, p, d, tol)?);
    }

    let mut order: Vec<usize> = (0..idempotents.len()).collect();
    let e = s.jones();
    let keyed: Vec<(bool, f64, Vec<i64>)> = idempotents
        .iter()
        .map(|p| {
            let holds_e = p.mul(&e).map(|x| x.approx_eq(&e, tol)).unwrap_or(false);
            let t = p.trace().re;
            let lex: Vec<i64> = p
                .coeffs()
                .iter()
                .map(|z| (z.re / tol.eq_tol).round() as i64)
                .collect();
            (holds_e, t, lex)
        })
        .collect();
    order.sort_by(|&i, &j| {
        keyed[j]
            .0
            .cmp(&keyed[i].0)
            .then(keyed[i].1.partial_cmp(&keyed[j].1).unwrap())
            .then(keyed[i].2.cmp(&keyed[j].2))
    });

    let central_idempotents: Vec<Element> = order.iter().map(|&i| idempotents[i].clone()).collect();
    let block_dims: Vec<usize> = order.iter().map(|&i| dims[i]).collect();
    let block_traces: Vec<f64> = central_idempotents
        .iter()
        .zip(&block_dims)
        .map(|(p, &d)| p.trace().re / d as f64)
        .collect();
    let minimal_projections: Vec<Vec<Element>> = order.iter().map(|&i| minimal[i].clone()).collect();

    Ok(BlockDecomposition { central_idempotents, block_dims, block_traces, minimal_projections })
}

fn block_minimal_projections(
    s: &Structure,
    frame: &Frame,
    block: &Element,
    d: usize,
    tol: &Tolerance,
) -> Result<Vec<Element>, StructureError> {
    let n = s.dim();
    let mut rng = SplitMix64::new(0x3A11_0CA7);
    for _ in 0..8 {
        let basis: Vec<Vec<C64>> = (0..n).map(|i| s.basis_element(i).coeffs().to_vec()).collect();
        let y = generic_self_adjoint_combination(s, &basis, &mut rng);
        let y = block.mul(&y)?.mul(block)?;
        let idems = spectral_idempotents(&y, frame, tol)?;
        // discard the part outside the block (eigenvalue 0 cluster mixes in the
        // other blocks); keep idempotents under `block`
        let mut found: Vec<Element> = Vec::new();
        for (_, q) in idems {
            let inside = block.mul(&q).and_then(|x| x.mul(block))?;
            if inside.approx_eq(&q, tol) && q.is_projection(tol) {
                found.push(q);
            }
        }
        if found.len() == d {
            let want = block.trace().re / d as f64;
            if found
                .iter()
                .all(|q| rel_ok((q.trace().re - want).abs(), want.abs(), tol.eq_tol))
            {
                found.sort_by_key(|q| {
                    q.coeffs()
                        .iter()
                        .map(|z| (z.re / tol.eq_tol).round() as i64)
                        .collect::<Vec<_>>()
                });
                return Ok(found);
            }
        }
    }
    Err(StructureError::NumericallyDegenerate(
        "could not split a matrix block into minimal projections".into(),
    ))
}

/// Rank of a positive element: the number of minimal projections in its
/// spectral resolution, computed per block as (matrix rank in the regular
/// representation of the block) / d_i.
pub fn rank(x: &Element, tol: &Tolerance) -> Result<usize, StructureError> {
    let s = x.owner();
    let frame = s.frame(tol)?;
    let blocks = block_decomposition_with(s, &frame, tol)?;
    rank_with(x, &frame, &blocks, tol)
}

pub fn rank_with(
    x: &Element,
    frame: &Frame,
    blocks: &BlockDecomposition,
    tol: &Tolerance,
) -> Result<usize, StructureError> {
    let s = x.owner();
    if !is_psd(x, frame, tol)? {
        return Err(StructureError::Linalg(crate::linalg::LinalgError::NotPositive {
            min_eig: min_product_eigenvalue(x, frame, tol)?,
        }));
    }
    let mut total = 0;
    for (p, &d) in blocks.central_idempotents.iter().zip(&blocks.block_dims) {
        let xp = x.mul(p)?;
        let r = matrix_rank(&product_rep(s, frame, &xp), tol)?;
        if r % d != 0 {
            return Err(StructureError::NumericallyDegenerate(format!(
                "regular-representation rank {r} is not a multiple of the block dimension {d}"
            )));
        }
        total += r / d;
    }
    Ok(total)
}

/// Random positive element `w^* w` with coefficients drawn from `rng`.
pub fn random_psd(s: &Structure, rng: &mut SplitMix64) -> Element {
    let coeffs: Vec<C64> = (0..s.dim()).map(|_| rng.complex()).collect();
    let w = s.element(coeffs);
    w.adjoint().mul(&w).expect("same owner")
}

/// Random self-adjoint element.
pub fn random_self_adjoint(s: &Structure, rng: &mut SplitMix64) -> Element {
    let coeffs: Vec<C64> = (0..s.dim()).map(|_| rng.complex()).collect();
    let w = s.element(coeffs);
    w.add(&w.adjoint()).expect("same owner").scale_re(0.5)
}
