//! Independent numerical oracles for the frozen expected values.
//!
//! The eigensolver results used across the crate are cross-checked here
//! against routes that share no code with the Jacobi path: characteristic
//! polynomial coefficients through Newton's identities plus bisection root
//! finding, hand-built convolution matrices from the published coproduct
//! table of the dihedral subgroup family, the discrete Fourier transform on
//! cyclic groups, and the character theory of the symmetric group S3.

use num_complex::Complex64;
use twobox::blocks::block_decomposition;
use twobox::catalog::{self, GroupPresentation};
use twobox::classify::find_isomorphism;
use twobox::linalg::{hermitian_eig, spectral_projection_max, Mat, Tolerance};
use twobox::positivity::convolution_operator;
use twobox::structure::StructureExt;

type C64 = Complex64;

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Characteristic polynomial coefficients of a small real symmetric matrix
/// via Newton's identities on power traces.
fn char_poly(n: &[[f64; 4]; 4]) -> [f64; 5] {
    let mul = |a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]| {
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    };
    let trace = |a: &[[f64; 4]; 4]| a[0][0] + a[1][1] + a[2][2] + a[3][3];
    let n2 = mul(n, n);
    let n3 = mul(&n2, n);
    let n4 = mul(&n3, n);
    let (t1, t2, t3, t4) = (trace(n), trace(&n2), trace(&n3), trace(&n4));
    let e1 = t1;
    let e2 = (e1 * t1 - t2) / 2.0;
    let e3 = (e2 * t1 - e1 * t2 + t3) / 3.0;
    let e4 = (e3 * t1 - e2 * t2 + e1 * t3 - t4) / 4.0;
    // p(x) = x^4 - e1 x^3 + e2 x^2 - e3 x + e4
    [e4, -e3, e2, -e1, 1.0]
}

fn eval(p: &[f64; 5], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// All real roots on [-bound, bound] by sign-change scanning and bisection.
fn real_roots(p: &[f64; 5], bound: f64) -> Vec<f64> {
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev_x = -bound;
    let mut prev_v = eval(p, prev_x);
    for i in 1..=steps {
        let x = -bound + 2.0 * bound * i as f64 / steps as f64;
        let v = eval(p, x);
        if prev_v == 0.0 {
            roots.push(prev_x);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval(p, lo) * eval(p, mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    roots
}

/// The p=7 convolution matrix of g1 over the orthonormal frame
/// {e, g1/sqrt2, g2/sqrt2, g3/sqrt2}, built by hand from the coproduct rule
/// `delta g_m * g_n = g_{m+n} + g_{m-n}` (indices folded mod 7, g_0 = 2e).
fn g1_convolution_times_delta() -> [[f64; 4]; 4] {
    let r2 = 2.0f64.sqrt();
    [
        [0.0, r2, 0.0, 0.0],
        [r2, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 1.0],
    ]
}

#[test]
fn top_eigenvalue_of_g1_convolution_via_characteristic_polynomial() {
    let delta = 7.0f64.sqrt();
    let n = g1_convolution_times_delta();
    let p = char_poly(&n);
    let roots = real_roots(&p, 3.0);
    assert_eq!(roots.len(), 4, "quartic should have four real roots, got {roots:?}");
    let top = roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // the top root is 2, i.e. 2/sqrt(7) for the convolution operator itself
    assert!((top - 2.0).abs() < 1e-9, "top root {top}");
    // the other roots are 2cos(2 pi k / 7)
    for k in 1..=3 {
        let want = 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 7.0).cos();
        assert!(
            roots.iter().any(|r| (r - want).abs() < 1e-9),
            "missing root {want} in {roots:?}"
        );
    }

    // the Jacobi path agrees on the same matrix
    let m = Mat::from_fn(4, 4, |i, j| C64::new(n[i][j] / delta, 0.0));
    let eig = hermitian_eig(&m, &tol()).unwrap();
    assert!((eig.eigenvalues[3] - top / delta).abs() < 1e-12);

    // and the catalog-built convolution operator agrees as well
    let s = catalog::subgroup_2p2(7).unwrap();
    let op = convolution_operator(&s.basis_element(1), &tol()).unwrap();
    let eig = hermitian_eig(&op.matrix, &tol()).unwrap();
    assert!((eig.eigenvalues[3] - 2.0 / delta).abs() < 1e-10);
    assert!((eig.eigenvalues[3] - s.basis_element(1).trace().re / delta).abs() < 1e-10);
}

#[test]
fn top_spectral_projection_of_g1_plus_contragredient() {
    // g1 is self-contragredient, so L_{g1+g1'} = 2 L_{g1}; its top eigenspace
    // is the rank-one Perron direction (1, sqrt2, sqrt2, sqrt2)/sqrt(7), and
    // the theorem identifies it with the convolution image of
    // (delta/tr(id)) id = id/delta
    let t = tol();
    let s = catalog::subgroup_2p2(7).unwrap();
    let delta = s.delta();
    let g1 = s.basis_element(1);
    let sym = g1.add(&g1.contragredient()).unwrap();
    let op = convolution_operator(&sym, &t).unwrap();
    let top = spectral_projection_max(&op.matrix, &t).unwrap();

    // independent Perron projection
    let r2 = 2.0f64.sqrt();
    let v = [1.0, r2, r2, r2];
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let expected = Mat::from_fn(4, 4, |i, j| C64::new(v[i] * v[j] / norm2, 0.0));
    assert!(top.sub(&expected).frobenius() < 1e-10);

    // the delta e direction (first coordinate) is not in the top eigenspace
    assert!((top[(0, 0)].re - 1.0 / 7.0).abs() < 1e-10);

    // equality with the convolution image of id/delta
    let image = convolution_operator(&s.unit().scale_re(1.0 / delta), &t).unwrap();
    assert!(top.sub(&image.matrix).frobenius() < 1e-10);
}

#[test]
fn dual_of_cyclic_group_is_the_group_again() {
    // abelian self-duality, with the discrete Fourier characters as the
    // minimal idempotents of the dual product
    let t = tol();
    let s = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
    let dual = catalog::fourier_dual(&s, &t).unwrap();
    let delta = s.delta();
    let i = C64::new(0.0, 1.0);
    // u_k = (delta/4) sum_g i^{gk} P_g are orthogonal idempotents of the dual
    let us: Vec<_> = (0..4u32)
        .map(|k| dual.element((0..4u32).map(|g| i.powu(g * k) * (delta / 4.0)).collect()))
        .collect();
    for (a, ua) in us.iter().enumerate() {
        for (b, ub) in us.iter().enumerate() {
            let prod = ua.mul(ub).unwrap();
            if a == b {
                assert!(prod.approx_eq(ua, &t));
            } else {
                assert!(prod.is_zero(&t));
            }
        }
    }
    assert!(find_isomorphism(&dual, &s, &t).unwrap().is_some());
}

#[test]
fn dual_of_s3_has_the_character_theoretic_blocks() {
    // the dual product algebra is the group algebra C[S3]; its Wedderburn
    // blocks have dimensions equal to the irreducible character degrees
    // (1, 1, 2), with block identity traces 6 d^2 / |G| scaled to the Markov
    // normalization tr(P_g) = 1 on the dual side giving tr = d^2
    let t = tol();
    let s = catalog::group(&GroupPresentation::symmetric_3()).unwrap();
    let dual = catalog::fourier_dual(&s, &t).unwrap();
    let blocks = block_decomposition(&dual, &t).unwrap();
    let mut dims = blocks.block_dims.clone();
    dims.sort();
    assert_eq!(dims, vec![1, 1, 2]);
    // total dimension check: 1 + 1 + 4 = 6
    let total: usize = blocks.block_dims.iter().map(|d| d * d).sum();
    assert_eq!(total, 6);
}

#[test]
fn z4_coproduct_normalization_forced_by_unit_law() {
    // (delta P_0) * P_g = P_g pins the 1/delta factor in the group coproduct
    let t = tol();
    let s = catalog::group(&GroupPresentation::cyclic(4)).unwrap();
    let delta = s.delta();
    for g in 0..4 {
        let pg = s.basis_element(g);
        let left = s.jones().scale_re(delta).coproduct(&pg).unwrap();
        assert!(left.approx_eq(&pg, &t));
        for h in 0..4 {
            let ph = s.basis_element(h);
            let want = s.basis_element((g + h) % 4).scale_re(1.0 / delta);
            assert!(pg.coproduct(&ph).unwrap().approx_eq(&want, &t));
        }
    }
}
