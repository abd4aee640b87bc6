//! JSON forms of matrices and witnesses.
//!
//! A matrix is `{"rows": m, "cols": n, "p": [[...], ...]}`; a witness is
//! `{"base": <matrix>, "steps": [{"dims": [m, n, m1, n1], "t": [...]}]}` with `t` flattened
//! in row-major order over `(a, b, a*, b*)`. Floats are written in shortest round-trip form,
//! so parsing a written value gives back the same bits.

use serde::{Deserialize, Serialize};

use crate::distribution::{GammaCoupling, JointDistribution};
use crate::error::{Error, Result};
use crate::witness::{DerivationWitness, QuadJoint};

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    p: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    dims: [usize; 4],
    t: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WitnessDoc {
    base: MatrixDoc,
    steps: Vec<StepDoc>,
}

fn matrix_doc(j: &JointDistribution) -> MatrixDoc {
    MatrixDoc { rows: j.rows(), cols: j.cols(), p: j.to_rows() }
}

fn from_doc(doc: MatrixDoc) -> Result<JointDistribution> {
    if doc.p.len() != doc.rows || doc.p.iter().any(|r| r.len() != doc.cols) {
        return Err(Error::Parse(format!("declared {}x{} does not match the rows of p", doc.rows, doc.cols)));
    }
    JointDistribution::from_rows(&doc.p)
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn matrix_to_json(j: &JointDistribution) -> String {
    serde_json::to_string_pretty(&matrix_doc(j)).expect("plain data serializes")
}

pub fn matrix_from_json(text: &str) -> Result<JointDistribution> {
    from_doc(serde_json::from_str(text).map_err(parse_err)?)
}

pub fn witness_to_json(w: &DerivationWitness) -> String {
    let doc = WitnessDoc {
        base: matrix_doc(w.base()),
        steps: w.steps().iter().map(|s| StepDoc { dims: s.dims(), t: s.entries().to_vec() }).collect(),
    };
    serde_json::to_string(&doc).expect("plain data serializes")
}

/// Parses a witness. Shapes must chain, and each tensor must be a distribution.
pub fn witness_from_json(text: &str) -> Result<DerivationWitness> {
    let doc: WitnessDoc = serde_json::from_str(text).map_err(parse_err)?;
    let base = from_doc(doc.base)?;
    let steps = doc.steps.into_iter().map(|s| QuadJoint::new(s.dims, s.t)).collect::<Result<Vec<_>>>()?;
    DerivationWitness::new(base, steps)
}

/// Like `witness_from_json`, but rescales the base and every tensor to unit mass, so a
/// hand-edited entry shows up in validation instead of failing the parse.
pub fn witness_from_json_normalized(text: &str) -> Result<DerivationWitness> {
    let doc: WitnessDoc = serde_json::from_str(text).map_err(parse_err)?;
    if doc.base.p.len() != doc.base.rows || doc.base.p.iter().any(|r| r.len() != doc.base.cols) {
        return Err(Error::Parse("base rows do not match its declared shape".into()));
    }
    let base = JointDistribution::normalized(crate::distribution::matrix_from_rows(&doc.base.p)?)?;
    let steps = doc.steps.into_iter().map(|s| QuadJoint::settle(s.dims, s.t)).collect::<Result<Vec<_>>>()?;
    DerivationWitness::new(base, steps)
}

#[derive(Deserialize)]
struct GammaDoc {
    rows: usize,
    cols: usize,
    range: usize,
    q: Vec<f64>,
}

/// Parses `{"rows": m, "cols": n, "range": r, "q": [...]}` with `q[(a * n + b) * r + g]`
/// the probability of `g` given the cell `(a, b)`.
pub fn gamma_from_json(text: &str) -> Result<GammaCoupling> {
    let doc: GammaDoc = serde_json::from_str(text).map_err(parse_err)?;
    GammaCoupling::new(doc.rows, doc.cols, doc.range, doc.q)
}
