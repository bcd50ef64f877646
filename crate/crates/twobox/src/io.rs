//! The `tbx-1` document format: a JSON serialization of a two-box structure.
//!
//! Numbers are written as shortest round-trip decimals, so
//! `parse(serialize(s))` reproduces every table bit-for-bit. Unknown fields
//! are rejected. Parsing validates the axiom suite unless forced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::verify_axioms;
use crate::linalg::{Mat, Tolerance, C64};
use crate::structure::{Structure, StructureError, TwoBoxStructure};

pub const FORMAT_VERSION: &str = "tbx-1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("format version mismatch: found `{found}`, expected `{FORMAT_VERSION}`")]
    VersionMismatch { found: String },
    #[error("document fails the axiom suite: {0}")]
    AxiomFailure(String),
    #[error("invalid document: {0}")]
    Invalid(String),
}

/// The Jones projection and unit are stored either as a basis position or as
/// a full coefficient vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementRef {
    Index(usize),
    Coefficients(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TbxDocument {
    pub format_version: String,
    pub name: String,
    pub dim: usize,
    pub delta: f64,
    pub labels: Vec<String>,
    pub trace: Vec<f64>,
    /// `product[i][j]` = coefficient vector of `b_i . b_j`, entries `[re, im]`.
    pub product: Vec<Vec<Vec<[f64; 2]>>>,
    pub coproduct: Vec<Vec<Vec<[f64; 2]>>>,
    /// Column `j` = coefficients of the contragredient of `b_j`.
    pub contragredient: Vec<Vec<[f64; 2]>>,
    /// Applied to the conjugated coefficient vector.
    pub adjoint: Vec<Vec<[f64; 2]>>,
    pub unit_index: ElementRef,
    pub jones_index: ElementRef,
}

fn pack(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpack(p: &[f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

fn pack_vec(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(pack).collect()
}

fn unpack_vec(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(unpack).collect()
}

fn element_ref(coeffs: &[C64]) -> ElementRef {
    let ones: Vec<usize> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, z)| **z != C64::new(0.0, 0.0))
        .map(|(i, _)| i)
        .collect();
    if ones.len() == 1 && coeffs[ones[0]] == C64::new(1.0, 0.0) {
        ElementRef::Index(ones[0])
    } else {
        ElementRef::Coefficients(pack_vec(coeffs))
    }
}

fn resolve_ref(r: &ElementRef, dim: usize, what: &str) -> Result<Vec<C64>, IoError> {
    match r {
        ElementRef::Index(i) => {
            if *i >= dim {
                return Err(IoError::Invalid(format!("{what} index {i} out of range")));
            }
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[*i] = C64::new(1.0, 0.0);
            Ok(v)
        }
        ElementRef::Coefficients(c) => {
            if c.len() != dim {
                return Err(IoError::Invalid(format!("{what} coefficient length != dim")));
            }
            Ok(unpack_vec(c))
        }
    }
}

pub fn to_document(s: &Structure) -> TbxDocument {
    let n = s.dim();
    let table = |t: &Vec<Vec<Vec<C64>>>| -> Vec<Vec<Vec<[f64; 2]>>> {
        t.iter().map(|row| row.iter().map(|v| pack_vec(v)).collect()).collect()
    };
    let matrix = |m: &Mat| -> Vec<Vec<[f64; 2]>> {
        (0..n).map(|i| (0..n).map(|j| pack(&m[(i, j)])).collect()).collect()
    };
    TbxDocument {
        format_version: FORMAT_VERSION.to_string(),
        name: s.name().to_string(),
        dim: n,
        delta: s.delta(),
        labels: s.labels().to_vec(),
        trace: s.trace_vector().to_vec(),
        product: table(s.product_table()),
        coproduct: table(s.coproduct_table()),
        contragredient: matrix(s.contragredient_matrix()),
        adjoint: matrix(s.adjoint_matrix()),
        unit_index: element_ref(s.unit_coeffs()),
        jones_index: element_ref(s.jones_coeffs()),
    }
}

/// Deterministic pretty-printed JSON for a structure.
pub fn serialize(s: &Structure) -> String {
    let doc = to_document(s);
    let mut out = serde_json::to_string_pretty(&doc).expect("document serialization");
    out.push('\n');
    out
}

pub fn from_document(doc: &TbxDocument) -> Result<Structure, IoError> {
    if doc.format_version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch { found: doc.format_version.clone() });
    }
    let n = doc.dim;
    if doc.labels.len() != n {
        return Err(IoError::Invalid("labels length != dim".into()));
    }
    if doc.trace.len() != n {
        return Err(IoError::Invalid("trace length != dim".into()));
    }
    let table_shape = |t: &Vec<Vec<Vec<[f64; 2]>>>, what: &str| -> Result<(), IoError> {
        if t.len() != n || t.iter().any(|r| r.len() != n || r.iter().any(|v| v.len() != n)) {
            return Err(IoError::Invalid(format!("{what} table is not dim x dim x dim")));
        }
        Ok(())
    };
    table_shape(&doc.product, "product")?;
    table_shape(&doc.coproduct, "coproduct")?;
    let matrix = |m: &Vec<Vec<[f64; 2]>>, what: &str| -> Result<Mat, IoError> {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(IoError::Invalid(format!("{what} matrix is not dim x dim")));
        }
        Ok(Mat::from_fn(n, n, |i, j| unpack(&m[i][j])))
    };
    let contragredient = matrix(&doc.contragredient, "contragredient")?;
    let adjoint = matrix(&doc.adjoint, "adjoint")?;
    let unit = resolve_ref(&doc.unit_index, n, "unit")?;
    let jones = resolve_ref(&doc.jones_index, n, "jones")?;
    let unpack_table = |t: &Vec<Vec<Vec<[f64; 2]>>>| -> Vec<Vec<Vec<C64>>> {
        t.iter().map(|row| row.iter().map(|v| unpack_vec(v)).collect()).collect()
    };
    TwoBoxStructure::new(
        doc.name.clone(),
        doc.labels.clone(),
        doc.delta,
        unpack_table(&doc.product),
        unpack_table(&doc.coproduct),
        doc.trace.clone(),
        contragredient,
        adjoint,
        unit,
        jones,
    )
    .map_err(|e| match e {
        StructureError::BadDelta(d) => IoError::Invalid(format!("delta {d} must exceed 1")),
        other => IoError::Invalid(other.to_string()),
    })
}

/// Parses a `tbx-1` document. Runs the axiom suite and refuses failing
/// documents unless `force` is set.
pub fn parse(text: &str, tol: &Tolerance, force: bool) -> Result<Structure, IoError> {
    let doc: TbxDocument = serde_json::from_str(text).map_err(|e| IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let s = from_document(&doc)?;
    if !force {
        let report = verify_axioms(&s, tol);
        if !report.pass {
            return Err(IoError::AxiomFailure(report.failures().join("; ")));
        }
    }
    Ok(s)
}
