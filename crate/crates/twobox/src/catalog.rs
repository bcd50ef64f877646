//! Constructors for the standard two-box structures.
//!
//! Temperley-Lieb, group structures (minimal projections indexed by group
//! elements, coproduct given by the group multiplication), Fourier duals,
//! the odd dihedral subgroup family Z2 < Zp x| Z2, free products and tensor
//! products, plus a name parser used by the CLI.

use thiserror::Error;

use crate::linalg::{least_squares, rel_ok, Mat, Tolerance, C64};
use crate::structure::{Structure, StructureError, StructureExt, TwoBoxStructure};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("delta={0} out of range: need delta > 1")]
    BadDelta(f64),
    #[error("{0} is not an odd prime >= 3")]
    BadPrime(u64),
    #[error("unknown catalog name `{0}`")]
    UnknownName(String),
    #[error("product or coproduct leaves the separated span (residual {residual:.3e}); inputs are not valid structures")]
    ClosureFailure { residual: f64 },
    #[error("Fourier dual fails the axiom suite ({0}); the input was not a valid structure")]
    DualAxiomFailure(String),
    #[error("invalid group presentation: {0}")]
    BadGroup(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A finite group given by its multiplication table.
#[derive(Debug, Clone)]
pub struct GroupPresentation {
    pub name: String,
    pub labels: Vec<String>,
    /// `mult[g][h]` = index of `gh`.
    pub mult: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
    pub identity: usize,
}

impl GroupPresentation {
    pub fn order(&self) -> usize {
        self.mult.len()
    }

    /// Exact integer check of the group axioms.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let n = self.order();
        if n == 0 {
            return Err(CatalogError::BadGroup("empty group".into()));
        }
        if self.labels.len() != n || self.inverse.len() != n || self.identity >= n {
            return Err(CatalogError::BadGroup("table shapes disagree".into()));
        }
        for row in &self.mult {
            if row.len() != n || row.iter().any(|&x| x >= n) {
                return Err(CatalogError::BadGroup("multiplication table out of range".into()));
            }
        }
        let e = self.identity;
        for g in 0..n {
            if self.mult[e][g] != g || self.mult[g][e] != g {
                return Err(CatalogError::BadGroup("identity law fails".into()));
            }
            if self.mult[g][self.inverse[g]] != e || self.mult[self.inverse[g]][g] != e {
                return Err(CatalogError::BadGroup("inverse law fails".into()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.mult[self.mult[a][b]][c] != self.mult[a][self.mult[b][c]] {
                        return Err(CatalogError::BadGroup("associativity fails".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn cyclic(n: usize) -> GroupPresentation {
        assert!(n >= 1);
        let mult = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let inverse = (0..n).map(|a| (n - a) % n).collect();
        GroupPresentation {
            name: format!("Z{n}"),
            labels: (0..n).map(|a| format!("{a}")).collect(),
            mult,
            inverse,
            identity: 0,
        }
    }

    pub fn symmetric_3() -> GroupPresentation {
        // elements as permutations of {0,1,2} in one-line notation
        let perms: Vec<[usize; 3]> = vec![
            [0, 1, 2],
            [1, 2, 0],
            [2, 0, 1],
            [1, 0, 2],
            [0, 2, 1],
            [2, 1, 0],
        ];
        let compose = |p: &[usize; 3], q: &[usize; 3]| [p[q[0]], p[q[1]], p[q[2]]];
        let idx = |r: [usize; 3]| perms.iter().position(|p| *p == r).unwrap();
        let n = perms.len();
        let mult: Vec<Vec<usize>> =
            (0..n).map(|a| (0..n).map(|b| idx(compose(&perms[a], &perms[b]))).collect()).collect();
        let mut inverse = vec![0; n];
        for a in 0..n {
            inverse[a] = (0..n).find(|&b| mult[a][b] == 0).unwrap();
        }
        GroupPresentation {
            name: "S3".into(),
            labels: vec!["id".into(), "r".into(), "rr".into(), "t".into(), "tr".into(), "trr".into()],
            mult,
            inverse,
            identity: 0,
        }
    }

    pub fn direct_product(a: &GroupPresentation, b: &GroupPresentation) -> GroupPresentation {
        let (na, nb) = (a.order(), b.order());
        let n = na * nb;
        let flat = |x: usize, y: usize| x * nb + y;
        let mut mult = vec![vec![0; n]; n];
        for x1 in 0..na {
            for y1 in 0..nb {
                for x2 in 0..na {
                    for y2 in 0..nb {
                        mult[flat(x1, y1)][flat(x2, y2)] = flat(a.mult[x1][x2], b.mult[y1][y2]);
                    }
                }
            }
        }
        let inverse = (0..n)
            .map(|g| flat(a.inverse[g / nb], b.inverse[g % nb]))
            .collect();
        let labels = (0..n)
            .map(|g| format!("{}.{}", a.labels[g / nb], b.labels[g % nb]))
            .collect();
        GroupPresentation {
            name: format!("{}x{}", a.name, b.name),
            labels,
            mult,
            inverse,
            identity: flat(a.identity, b.identity),
        }
    }
}

fn zero_table(n: usize) -> Vec<Vec<Vec<C64>>> {
    vec![vec![vec![C64::new(0.0, 0.0); n]; n]; n]
}

/// Temperley-Lieb at loop value `delta`: basis `{e, id}`.
///
/// The whole table is forced by the unit laws: `delta e` is the coproduct
/// unit and `a * id = (tr(a)/delta) id`.
pub fn temperley_lieb(delta: f64) -> Result<Structure, CatalogError> {
    if !delta.is_finite() || delta <= 1.0 {
        return Err(CatalogError::BadDelta(delta));
    }
    let n = 2;
    let one = C64::new(1.0, 0.0);
    let mut product = zero_table(n);
    // e.e = e, e.id = id.e = e, id.id = id
    product[0][0][0] = one;
    product[0][1][0] = one;
    product[1][0][0] = one;
    product[1][1][1] = one;
    let mut coproduct = zero_table(n);
    // e*e = e/delta, e*id = id*e = id/delta, id*id = delta.id
    coproduct[0][0][0] = one / delta;
    coproduct[0][1][1] = one / delta;
    coproduct[1][0][1] = one / delta;
    coproduct[1][1][1] = one * delta;
    let trace = vec![1.0, delta * delta];
    let s = TwoBoxStructure::new(
        format!("TL({delta})"),
        vec!["e".into(), "id".into()],
        delta,
        product,
        coproduct,
        trace,
        Mat::identity(n),
        Mat::identity(n),
        vec![C64::new(0.0, 0.0), one],
        vec![one, C64::new(0.0, 0.0)],
    )?;
    Ok(s)
}

/// Group structure: abelian product algebra of minimal projections indexed
/// by the group, coproduct given by the group multiplication over `delta`.
pub fn group(g: &GroupPresentation) -> Result<Structure, CatalogError> {
    g.validate()?;
    let n = g.order();
    let delta = (n as f64).sqrt();
    if delta <= 1.0 {
        return Err(CatalogError::BadDelta(delta));
    }
    let one = C64::new(1.0, 0.0);
    let mut product = zero_table(n);
    let mut coproduct = zero_table(n);
    for i in 0..n {
        product[i][i][i] = one;
        for j in 0..n {
            coproduct[i][j][g.mult[i][j]] = one / delta;
        }
    }
    let mut contragredient = Mat::zeros(n, n);
    for j in 0..n {
        contragredient[(g.inverse[j], j)] = one;
    }
    let mut jones = vec![C64::new(0.0, 0.0); n];
    jones[g.identity] = one;
    let labels = g.labels.iter().map(|l| format!("P{l}")).collect();
    let s = TwoBoxStructure::new(
        g.name.clone(),
        labels,
        delta,
        product,
        coproduct,
        vec![1.0; n],
        contragredient,
        Mat::identity(n),
        vec![one; n],
        jones,
    )?;
    Ok(s)
}

fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// The subgroup family Z2 < Zp x| Z2 for an odd prime `p`.
///
/// Basis `{e, g_1, .., g_(p-1)/2}` of orthogonal projections with
/// `tr(e) = 1`, `tr(g_m) = 2`, `delta = sqrt(p)`, and folded coproduct
/// `delta g_m * g_n = g_{m+n} + g_{m-n}` where `g_0 = 2e`, indices taken
/// mod `p` and reflected into `0..=(p-1)/2`.
pub fn subgroup_2p2(p: u64) -> Result<Structure, CatalogError> {
    if !is_odd_prime(p) {
        return Err(CatalogError::BadPrime(p));
    }
    let half = ((p - 1) / 2) as usize;
    let n = half + 1;
    let delta = (p as f64).sqrt();
    let one = C64::new(1.0, 0.0);
    let fold = |k: i64| -> usize {
        let r = k.rem_euclid(p as i64) as u64;
        if r > (p - 1) / 2 {
            (p - r) as usize
        } else {
            r as usize
        }
    };
    let mut product = zero_table(n);
    for i in 0..n {
        product[i][i][i] = one;
    }
    let mut coproduct = zero_table(n);
    for m in 0..=half {
        for k in 0..=half {
            // delta g_m * g_n = g_{m+n} + g_{m-n}, with g_0 = 2e; divide out the
            // 2's when either side is e = g_0 / 2
            let mut add = |target: usize, weight: f64| {
                let w = if target == 0 { 2.0 * weight } else { weight };
                coproduct[m][k][target] += one * (w / delta);
            };
            let scale = 1.0 / (if m == 0 { 2.0 } else { 1.0 }) / (if k == 0 { 2.0 } else { 1.0 });
            add(fold(m as i64 + k as i64), scale);
            add(fold(m as i64 - k as i64), scale);
        }
    }
    let mut trace = vec![2.0; n];
    trace[0] = 1.0;
    let mut labels = vec!["e".to_string()];
    labels.extend((1..=half).map(|m| format!("g{m}")));
    let mut jones = vec![C64::new(0.0, 0.0); n];
    jones[0] = one;
    let s = TwoBoxStructure::new(
        format!("Z2subZ{p}"),
        labels,
        delta,
        product,
        coproduct,
        trace,
        Mat::identity(n),
        Mat::identity(n),
        vec![one; n],
        jones,
    )?;
    Ok(s)
}

fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

fn kron_mat(a: &Mat, b: &Mat) -> Mat {
    Mat::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |i, j| {
        a[(i / b.rows(), j / b.cols())] * b[(i % b.rows(), j % b.cols())]
    })
}

/// Tensor product: full tensor basis, all five data componentwise.
pub fn tensor_product(a: &Structure, b: &Structure) -> Result<Structure, CatalogError> {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let pa = a.product_table();
    let pb = b.product_table();
    let ca = a.coproduct_table();
    let cb = b.coproduct_table();
    let mut product = zero_table(n);
    let mut coproduct = zero_table(n);
    for i1 in 0..na {
        for j1 in 0..nb {
            for i2 in 0..na {
                for j2 in 0..nb {
                    product[i1 * nb + j1][i2 * nb + j2] = kron(&pa[i1][i2], &pb[j1][j2]);
                    coproduct[i1 * nb + j1][i2 * nb + j2] = kron(&ca[i1][i2], &cb[j1][j2]);
                }
            }
        }
    }
    let trace: Vec<f64> = a
        .trace_vector()
        .iter()
        .flat_map(|&ta| b.trace_vector().iter().map(move |&tb| ta * tb))
        .collect();
    let labels: Vec<String> = a
        .labels()
        .iter()
        .flat_map(|la| b.labels().iter().map(move |lb| format!("{la}(x){lb}")))
        .collect();
    let s = TwoBoxStructure::new(
        format!("tensor({},{})", a.name(), b.name()),
        labels,
        a.delta() * b.delta(),
        product,
        coproduct,
        trace,
        kron_mat(a.contragredient_matrix(), b.contragredient_matrix()),
        kron_mat(a.adjoint_matrix(), b.adjoint_matrix()),
        kron(a.unit_coeffs(), b.unit_coeffs()),
        kron(a.jones_coeffs(), b.jones_coeffs()),
    )?;
    Ok(s)
}

/// Free product, realized inside the tensor product on the separated span
/// `span{ a_i (x) e } + span{ id (x) b_j }` of dimension
/// `dim A + dim B - 1`. Products and coproducts are computed componentwise
/// in the tensor structure and re-expressed in the separated basis; any
/// residual outside the span means the inputs were malformed.
pub fn free_product(
    a: &Structure,
    b: &Structure,
    tol: &Tolerance,
) -> Result<Structure, CatalogError> {
    let t = tensor_product(a, b)?;
    let (na, nb) = (a.dim(), b.dim());
    let n = na + nb - 1;

    // complement of the Jones projection inside B, orthogonalized against e
    let eb = b.jones();
    let mut comp: Vec<(usize, Vec<C64>, f64)> = Vec::new();
    for j in 0..nb {
        let bj = b.basis_element(j);
        let overlap = bj.inner(&eb)?;
        let c = bj.sub(&eb.scale(overlap))?;
        if c.norm() > 1e-9 {
            comp.push((j, c.coeffs().to_vec(), overlap.norm()));
        }
    }
    // keep a linearly independent subset, deterministically by basis order
    let mut kept: Vec<(usize, Vec<C64>, f64)> = Vec::new();
    for cand in comp {
        let mut cols: Vec<Vec<C64>> = kept.iter().map(|(_, v, _)| v.clone()).collect();
        cols.push(cand.1.clone());
        let m = Mat::from_cols(nb, &cols);
        if crate::linalg::matrix_rank(&m, tol).map_err(StructureError::from)? == cols.len() {
            kept.push(cand);
        }
    }
    if kept.len() != nb - 1 {
        return Err(CatalogError::ClosureFailure { residual: f64::INFINITY });
    }

    // separated basis as coefficient vectors in the tensor structure
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut labels: Vec<String> = Vec::with_capacity(n);
    for i in 0..na {
        basis.push(kron(a.basis_element(i).coeffs(), eb.coeffs()));
        labels.push(format!("{}(x)e", a.labels()[i]));
    }
    for (j, c, overlap) in &kept {
        basis.push(kron(a.unit_coeffs(), c));
        if *overlap < 1e-12 {
            labels.push(format!("id(x){}", b.labels()[*j]));
        } else {
            labels.push(format!("id(x)({}-e)", b.labels()[*j]));
        }
    }
    let v = Mat::from_cols(t.dim(), &basis);

    let express = |w: &[C64]| -> Result<Vec<C64>, CatalogError> {
        let (x, residual) = least_squares(&v, w, tol).map_err(StructureError::from)?;
        let scale = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !rel_ok(residual, scale, tol.eq_tol) {
            return Err(CatalogError::ClosureFailure { residual });
        }
        Ok(x)
    };

    let mut product = zero_table(n);
    let mut coproduct = zero_table(n);
    let elems: Vec<_> = basis.iter().map(|c| t.element(c.clone())).collect();
    for i in 0..n {
        for j in 0..n {
            product[i][j] = express(elems[i].mul(&elems[j])?.coeffs())?;
            coproduct[i][j] = express(elems[i].coproduct(&elems[j])?.coeffs())?;
        }
    }
    let mut trace = Vec::with_capacity(n);
    for el in &elems {
        let tr = el.trace();
        if tr.im.abs() > tol.eq_tol * (1.0 + tr.norm()) {
            return Err(CatalogError::ClosureFailure { residual: tr.im.abs() });
        }
        trace.push(tr.re);
    }
    let mut contragredient = Mat::zeros(n, n);
    let mut adjoint = Mat::zeros(n, n);
    for j in 0..n {
        let cg = express(elems[j].contragredient().coeffs())?;
        // the adjoint matrix acts on conjugated coefficients; basis vector j has
        // real coefficient 1 there, so the column is just the re-expressed image
        let ad = express(elems[j].adjoint().coeffs())?;
        for i in 0..n {
            contragredient[(i, j)] = cg[i];
            adjoint[(i, j)] = ad[i];
        }
    }
    let unit = express(t.unit_coeffs())?;
    let jones = express(t.jones_coeffs())?;
    let s = TwoBoxStructure::new(
        format!("free({},{})", a.name(), b.name()),
        labels,
        a.delta() * b.delta(),
        product,
        coproduct,
        trace,
        contragredient,
        adjoint,
        unit,
        jones,
    )?;
    Ok(s)
}

/// The canonical non-trivial biprojection `id (x) e` of a free product,
/// expressed over the separated basis (the first `dim A` basis vectors carry
/// the unit coefficients of `A`).
pub fn free_product_separator(free: &Structure, dim_a: usize, a_unit: &[C64]) -> crate::structure::Element {
    let mut coeffs = vec![C64::new(0.0, 0.0); free.dim()];
    coeffs[..dim_a].copy_from_slice(&a_unit[..dim_a]);
    free.element(coeffs)
}

/// Fourier dual: the same coefficient space with product and coproduct
/// exchanged. The unit laws force the normalization: the new product unit is
/// `delta e`, the new Jones projection is `id / delta`, the new trace is
/// `a -> delta tr(a e)`, and the new adjoint is `a -> (a^*)'`. The output
/// must pass the axiom suite; a failure means the input was not a valid
/// structure.
pub fn fourier_dual(s: &Structure, tol: &Tolerance) -> Result<Structure, CatalogError> {
    let n = s.dim();
    let delta = s.delta();
    let e = s.jones();
    let mut trace = Vec::with_capacity(n);
    for i in 0..n {
        let t = s.basis_element(i).mul(&e)?.trace() * delta;
        if t.im.abs() > tol.eq_tol * (1.0 + t.norm()) {
            return Err(CatalogError::DualAxiomFailure(format!(
                "dual trace of basis vector {i} is not real"
            )));
        }
        trace.push(t.re);
    }
    let unit: Vec<C64> = s.jones_coeffs().iter().map(|z| z * delta).collect();
    let jones: Vec<C64> = s.unit_coeffs().iter().map(|z| z / delta).collect();
    // dual adjoint a -> (a^*)': contragredient composed onto the adjoint matrix
    let adjoint = s.contragredient_matrix().mul(s.adjoint_matrix());
    let dual = TwoBoxStructure::new(
        format!("dual({})", s.name()),
        s.labels().to_vec(),
        delta,
        s.coproduct_table().clone(),
        s.product_table().clone(),
        trace,
        s.contragredient_matrix().clone(),
        adjoint,
        unit,
        jones,
    )?;
    let report = crate::axioms::verify_axioms(&dual, tol);
    if !report.pass {
        return Err(CatalogError::DualAxiomFailure(report.failures().join("; ")));
    }
    Ok(dual)
}

/// Catalog names accepted by the CLI.
///
/// Atoms: `TL`, `TL(d)`, `Zn`, `ZnxZm`, `S3`, `Z2subZp`, `FussCatalan(d1,d2)`.
/// Composites: `A-free-B`, `A-tensor-B` (left associative). A bare `TL`
/// uses `default_delta`.
pub fn named(name: &str, default_delta: f64, tol: &Tolerance) -> Result<Structure, CatalogError> {
    let name = name.trim();
    if let Some((head, tail)) = split_top_level(name, "-free-") {
        let a = named(&head, default_delta, tol)?;
        let b = named(&tail, default_delta, tol)?;
        return free_product(&a, &b, tol);
    }
    if let Some((head, tail)) = split_top_level(name, "-tensor-") {
        let a = named(&head, default_delta, tol)?;
        let b = named(&tail, default_delta, tol)?;
        return tensor_product(&a, &b);
    }
    atom(name, default_delta, tol)
}

/// Splits at the last top-level (not inside parentheses) occurrence of `sep`,
/// so that chains associate to the left.
fn split_top_level(name: &str, sep: &str) -> Option<(String, String)> {
    let bytes = name.as_bytes();
    let mut depth = 0i32;
    let mut found: Option<usize> = None;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            _ => {
                if depth == 0 && name[i..].starts_with(sep) {
                    found = Some(i);
                }
            }
        }
        i += 1;
    }
    found.map(|i| (name[..i].to_string(), name[i + sep.len()..].to_string()))
}

fn atom(name: &str, default_delta: f64, tol: &Tolerance) -> Result<Structure, CatalogError> {
    if name == "TL" {
        return temperley_lieb(default_delta);
    }
    if let Some(args) = name.strip_prefix("TL(").and_then(|r| r.strip_suffix(')')) {
        let d: f64 = args.trim().parse().map_err(|_| CatalogError::UnknownName(name.into()))?;
        return temperley_lieb(d);
    }
    if let Some(args) = name.strip_prefix("FussCatalan(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 2 {
            return Err(CatalogError::UnknownName(name.into()));
        }
        let d1: f64 = parts[0].trim().parse().map_err(|_| CatalogError::UnknownName(name.into()))?;
        let d2: f64 = parts[1].trim().parse().map_err(|_| CatalogError::UnknownName(name.into()))?;
        return free_product(&temperley_lieb(d1)?, &temperley_lieb(d2)?, tol);
    }
    if name == "S3" {
        return group(&GroupPresentation::symmetric_3());
    }
    if let Some(rest) = name.strip_prefix("Z2subZ") {
        let p: u64 = rest.parse().map_err(|_| CatalogError::UnknownName(name.into()))?;
        return subgroup_2p2(p);
    }
    if let Some(rest) = name.strip_prefix('Z') {
        if let Some((a, b)) = rest.split_once("xZ") {
            let (na, nb): (usize, usize) = match (a.parse(), b.parse()) {
                (Ok(x), Ok(y)) => (x, y),
                _ => return Err(CatalogError::UnknownName(name.into())),
            };
            return group(&GroupPresentation::direct_product(
                &GroupPresentation::cyclic(na),
                &GroupPresentation::cyclic(nb),
            ));
        }
        if let Ok(k) = rest.parse::<usize>() {
            if k >= 2 {
                return group(&GroupPresentation::cyclic(k));
            }
        }
    }
    Err(CatalogError::UnknownName(name.into()))
}
