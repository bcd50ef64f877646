//! Axiom verification for two-box structures.
//!
//! `verify_axioms` checks every structural law a two-box level of an
//! irreducible planar algebra must satisfy: the two unital associative
//! multiplications, the unit and trace normalizations, the contragredient and
//! adjoint symmetries, positivity of the Markov form, minimality and
//! centrality of the Jones projection, the rotation-invariance of the triple
//! trace, and Schur positivity of coproducts of positive elements. Failures
//! are reported with residuals, never thrown.

use crate::blocks::{block_decomposition_with, is_psd, min_product_eigenvalue, random_psd};
use crate::linalg::{hermitian_eig, Tolerance};
use crate::rng::SplitMix64;
use crate::structure::{Element, Structure, StructureExt};

/// Number of random positive pairs sampled for the Schur check.
const SCHUR_RANDOM_PAIRS: usize = 200;

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub pass: bool,
}

impl AxiomReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} (residual {:.3e} > {:.1e})", c.name, c.residual, c.tol))
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

struct Recorder {
    checks: Vec<AxiomCheck>,
}

impl Recorder {
    fn record(&mut self, name: &'static str, residual: f64, tol: f64) {
        let pass = residual.is_finite() && residual <= tol;
        self.checks.push(AxiomCheck { name, residual, tol, pass });
    }
}

fn rel(diff: &Element, scale: f64) -> f64 {
    diff.norm() / (1.0 + scale)
}

/// Runs the full axiom suite at the given tolerance.
pub fn verify_axioms(s: &Structure, tol: &Tolerance) -> AxiomReport {
    let mut rec = Recorder { checks: Vec::new() };
    let n = s.dim();
    let delta = s.delta();
    let basis: Vec<Element> = (0..n).map(|i| s.basis_element(i)).collect();
    let id = s.unit();
    let e = s.jones();
    let eq = tol.eq_tol;

    let pair = |f: &dyn Fn(&Element, &Element) -> Result<Element, crate::structure::StructureError>,
                g: &dyn Fn(&Element, &Element) -> Result<Element, crate::structure::StructureError>|
     -> f64 {
        let mut worst: f64 = 0.0;
        for a in &basis {
            for b in &basis {
                let (x, y) = match (f(a, b), g(a, b)) {
                    (Ok(x), Ok(y)) => (x, y),
                    _ => return f64::INFINITY,
                };
                let scale = x.norm().max(y.norm());
                if let Ok(diff) = x.sub(&y) {
                    worst = worst.max(rel(&diff, scale));
                }
            }
        }
        worst
    };

    // associativity of both multiplications over all basis triples
    let mut worst = 0.0f64;
    for a in &basis {
        for b in &basis {
            let ab = a.mul(b).unwrap();
            for c in &basis {
                let lhs = ab.mul(c).unwrap();
                let rhs = a.mul(&b.mul(c).unwrap()).unwrap();
                worst = worst.max(rel(&lhs.sub(&rhs).unwrap(), lhs.norm().max(rhs.norm())));
            }
        }
    }
    rec.record("product associativity", worst, eq);

    let mut worst = 0.0f64;
    for a in &basis {
        for b in &basis {
            let ab = a.coproduct(b).unwrap();
            for c in &basis {
                let lhs = ab.coproduct(c).unwrap();
                let rhs = a.coproduct(&b.coproduct(c).unwrap()).unwrap();
                worst = worst.max(rel(&lhs.sub(&rhs).unwrap(), lhs.norm().max(rhs.norm())));
            }
        }
    }
    rec.record("coproduct associativity", worst, eq);

    // units: id for the product, delta e for the coproduct
    let mut worst = 0.0f64;
    for a in &basis {
        let l = id.mul(a).unwrap();
        let r = a.mul(&id).unwrap();
        worst = worst.max(rel(&l.sub(a).unwrap(), a.norm()));
        worst = worst.max(rel(&r.sub(a).unwrap(), a.norm()));
    }
    rec.record("product unit", worst, eq);

    let de = e.scale_re(delta);
    let mut worst = 0.0f64;
    for a in &basis {
        let l = de.coproduct(a).unwrap();
        let r = a.coproduct(&de).unwrap();
        worst = worst.max(rel(&l.sub(a).unwrap(), a.norm()));
        worst = worst.max(rel(&r.sub(a).unwrap(), a.norm()));
    }
    rec.record("coproduct unit delta.e", worst, eq);

    // id * id = delta id
    let lhs = id.coproduct(&id).unwrap();
    let rhs = id.scale_re(delta);
    rec.record("id*id = delta id", rel(&lhs.sub(&rhs).unwrap(), rhs.norm()), eq);

    // a * id = id * a = (tr a / delta) id
    let mut worst = 0.0f64;
    for a in &basis {
        let want = id.scale(a.trace() / delta);
        let l = a.coproduct(&id).unwrap();
        let r = id.coproduct(a).unwrap();
        worst = worst.max(rel(&l.sub(&want).unwrap(), want.norm()));
        worst = worst.max(rel(&r.sub(&want).unwrap(), want.norm()));
    }
    rec.record("a*id = id*a = tr(a)/delta id", worst, eq);

    // contragredient: involution, anti-automorphism for both multiplications
    let mut worst = 0.0f64;
    for a in &basis {
        let back = a.contragredient().contragredient();
        worst = worst.max(rel(&back.sub(a).unwrap(), a.norm()));
    }
    rec.record("contragredient involution", worst, eq);
    rec.record(
        "(ab)' = b'a'",
        pair(
            &|a, b| a.mul(b).map(|x| x.contragredient()),
            &|a, b| b.contragredient().mul(&a.contragredient()),
        ),
        eq,
    );
    rec.record(
        "(a*b)' = b'*a'",
        pair(
            &|a, b| a.coproduct(b).map(|x| x.contragredient()),
            &|a, b| b.contragredient().coproduct(&a.contragredient()),
        ),
        eq,
    );
    let mut worst = rel(&id.contragredient().sub(&id).unwrap(), id.norm());
    worst = worst.max(rel(&e.contragredient().sub(&e).unwrap(), e.norm()));
    rec.record("id' = id, e' = e", worst, eq);

    // adjoint: conjugate-linear involution, anti-automorphism for the
    // product, homomorphism for the coproduct
    let mut worst = 0.0f64;
    for a in &basis {
        let back = a.adjoint().adjoint();
        worst = worst.max(rel(&back.sub(a).unwrap(), a.norm()));
    }
    // conjugate-linearity on a complex combination
    let mix = basis[0].scale(crate::linalg::C64::new(0.3, -0.7));
    let back = mix.adjoint().adjoint();
    let worst = worst.max(rel(&back.sub(&mix).unwrap(), mix.norm()));
    rec.record("adjoint involution", worst, eq);
    rec.record(
        "(ab)* = b*a*",
        pair(
            &|a, b| a.mul(b).map(|x| x.adjoint()),
            &|a, b| b.adjoint().mul(&a.adjoint()),
        ),
        eq,
    );
    rec.record(
        "(a*b)* = a* * b*",
        pair(
            &|a, b| a.coproduct(b).map(|x| x.adjoint()),
            &|a, b| a.adjoint().coproduct(&b.adjoint()),
        ),
        eq,
    );

    // positive definite Markov form
    let gram = s.gram();
    match hermitian_eig(&gram, tol) {
        Ok(eig) => {
            let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
            let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
            let floor = tol.rank_tol * max.max(1.0);
            rec.record("positive definite trace form", (floor - min).max(0.0), eq);
        }
        Err(_) => rec.record("positive definite trace form", f64::INFINITY, eq),
    }

    // trace normalizations and the triple-trace rotation identity
    rec.record("tr(e) = 1", (e.trace().re - 1.0).abs() / (1.0), eq);
    rec.record(
        "tr(id) = delta^2",
        (id.trace().re - delta * delta).abs() / (1.0 + delta * delta),
        eq,
    );

    let mut worst = 0.0f64;
    for a in &basis {
        for b in &basis {
            let ab = a.coproduct(b).unwrap();
            for c in &basis {
                let t1 = ab.mul(&c.contragredient()).unwrap().trace();
                let t2 = b.coproduct(c).unwrap().mul(&a.contragredient()).unwrap().trace();
                let t3 = c.coproduct(a).unwrap().mul(&b.contragredient()).unwrap().trace();
                let scale = t1.norm().max(t2.norm()).max(t3.norm());
                worst = worst.max(((t1 - t2).norm() + (t1 - t3).norm()) / (1.0 + scale));
            }
        }
    }
    rec.record("tr((a*b)c') cyclic invariance", worst, eq);

    // e is a central, minimal projection
    let mut worst = rel(&e.mul(&e).unwrap().sub(&e).unwrap(), e.norm());
    worst = worst.max(rel(&e.adjoint().sub(&e).unwrap(), e.norm()));
    rec.record("e is a projection", worst, eq);
    let mut worst = 0.0f64;
    for a in &basis {
        let l = e.mul(a).unwrap();
        let r = a.mul(&e).unwrap();
        worst = worst.max(rel(&l.sub(&r).unwrap(), l.norm().max(r.norm())));
    }
    rec.record("e is central", worst, eq);
    // minimality: e a e is a scalar multiple of e for all basis a
    let mut worst = 0.0f64;
    for a in &basis {
        let eae = e.mul(a).unwrap().mul(&e).unwrap();
        let coeff = eae.inner(&e).unwrap() / e.inner(&e).unwrap();
        worst = worst.max(rel(&eae.sub(&e.scale(coeff)).unwrap(), eae.norm()));
    }
    rec.record("e is minimal", worst, eq);

    // Schur positivity: exact on pairs of block-minimal projections, sampled
    // on random positive pairs; also tr(a*b) > 0 for nonzero positive pairs
    match s.frame(tol).and_then(|frame| {
        let blocks = block_decomposition_with(s, &frame, tol)?;
        Ok((frame, blocks))
    }) {
        Ok((frame, blocks)) => {
            let minimals = blocks.all_minimal_projections();
            let mut worst_neg = 0.0f64;
            let mut trace_floor = f64::INFINITY;
            let mut check_pair = |a: &Element, b: &Element| {
                let ab = match a.coproduct(b) {
                    Ok(x) => x,
                    Err(_) => return,
                };
                match min_product_eigenvalue(&ab, &frame, tol) {
                    Ok(min) => worst_neg = worst_neg.max((-min).max(0.0)),
                    Err(_) => worst_neg = f64::INFINITY,
                }
                let t = ab.trace();
                let scale = a.trace().re * b.trace().re / delta;
                trace_floor = trace_floor.min(if scale > 0.0 { t.re / scale } else { f64::NAN });
            };
            for a in &minimals {
                for b in &minimals {
                    check_pair(a, b);
                }
            }
            let mut rng = SplitMix64::new(0x5C0B_0001);
            for _ in 0..SCHUR_RANDOM_PAIRS {
                let a = random_psd(s, &mut rng);
                let b = random_psd(s, &mut rng);
                check_pair(&a, &b);
            }
            rec.record("Schur positivity of a*b", worst_neg, tol.rank_tol);
            // tr(a*b) should be tr(a)tr(b)/delta, in particular strictly positive
            rec.record(
                "tr(a*b) > 0 for positive pairs",
                if trace_floor.is_finite() { (1.0 - trace_floor).abs() } else { f64::INFINITY },
                eq,
            );
            // every block-minimal projection is genuinely positive
            let mut worst = 0.0f64;
            for p in &minimals {
                match is_psd(p, &frame, tol) {
                    Ok(true) => {}
                    _ => worst = f64::INFINITY,
                }
            }
            rec.record("block-minimal projections positive", worst, eq);
        }
        Err(_) => {
            rec.record("Schur positivity of a*b", f64::INFINITY, tol.rank_tol);
        }
    }

    let pass = rec.checks.iter().all(|c| c.pass);
    AxiomReport { checks: rec.checks, pass }
}
