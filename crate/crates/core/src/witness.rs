//! Derivation witnesses: a base pair plus one quadruple joint per derivation step.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::distribution::{clamp_bits, entropy, mutual_information, JointDistribution, SUM_TOL};
use crate::error::{Error, Result};

/// Default tolerance in bits for exactly constructed witnesses.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Total variation allowed between the two copies of a shared pair.
pub const MARGINAL_TOL: f64 = 1e-12;

/// Joint over `(a, b, a*, b*)`: the current pair and the next one.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadJoint {
    dims: [usize; 4],
    t: Vec<f64>,
}

impl QuadJoint {
    pub fn new(dims: [usize; 4], t: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) || t.len() != dims.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!("{} entries for axes {dims:?}", t.len())));
        }
        if let Some(k) = t.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NegativeEntry { row: k, col: 0, value: t[k] });
        }
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::SumNotOne { sum, deviation: sum - 1.0 });
        }
        Ok(Self { dims, t })
    }

    /// Clips float noise below zero and rescales to unit mass.
    pub(crate) fn settle(dims: [usize; 4], mut t: Vec<f64>) -> Result<Self> {
        for v in t.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 {
                    return Err(Error::NegativeEntry { row: 0, col: 0, value: *v });
                }
                *v = 0.0;
            }
        }
        let sum: f64 = t.iter().sum();
        t.iter_mut().for_each(|v| *v /= sum);
        Self::new(dims, t)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn entries(&self) -> &[f64] {
        &self.t
    }

    pub fn index(&self, a: usize, b: usize, i: usize, j: usize) -> usize {
        let [_, n, m1, n1] = self.dims;
        ((a * n + b) * m1 + i) * n1 + j
    }

    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.t[self.index(a, b, i, j)]
    }

    /// Distribution of the current pair `(a, b)`.
    pub fn pair_marginal(&self) -> DMatrix<f64> {
        let [m, n, m1, n1] = self.dims;
        let block = m1 * n1;
        DMatrix::from_fn(m, n, |a, b| self.t[(a * n + b) * block..(a * n + b + 1) * block].iter().sum())
    }

    /// Distribution of the next pair `(a*, b*)`.
    pub fn next_marginal(&self) -> DMatrix<f64> {
        let [m, n, m1, n1] = self.dims;
        let mut out = DMatrix::zeros(m1, n1);
        for c in 0..m * n {
            for i in 0..m1 {
                for j in 0..n1 {
                    out[(i, j)] += self.t[(c * m1 + i) * n1 + j];
                }
            }
        }
        out
    }

    /// `(I(a:b|a*), I(a:b|b*))` in bits.
    pub fn conditional_informations(&self) -> (f64, f64) {
        let [m, n, m1, n1] = self.dims;
        // x[(a, b, i)] and y[(a, b, j)]
        let mut x = vec![0.0; m * n * m1];
        let mut y = vec![0.0; m * n * n1];
        for a in 0..m {
            for b in 0..n {
                let c = a * n + b;
                for i in 0..m1 {
                    for j in 0..n1 {
                        let v = self.t[(c * m1 + i) * n1 + j];
                        x[c * m1 + i] += v;
                        y[c * n1 + j] += v;
                    }
                }
            }
        }
        (cmi_last_axis(&x, m, n, m1), cmi_last_axis(&y, m, n, n1))
    }
}

/// I(a:b|z) for a row-major joint over `(a, b, z)`.
fn cmi_last_axis(p: &[f64], m: usize, n: usize, k: usize) -> f64 {
    let mut az = vec![0.0; m * k];
    let mut bz = vec![0.0; n * k];
    let mut z = vec![0.0; k];
    for a in 0..m {
        for b in 0..n {
            for c in 0..k {
                let v = p[(a * n + b) * k + c];
                az[a * k + c] += v;
                bz[b * k + c] += v;
                z[c] += v;
            }
        }
    }
    clamp_bits(entropy(&az) + entropy(&bz) - entropy(p) - entropy(&z))
}

fn tv(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Base pair and the chain of quadruple joints that links it to an independent pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationWitness {
    base: JointDistribution,
    steps: Vec<QuadJoint>,
}

impl DerivationWitness {
    pub fn new(base: JointDistribution, steps: Vec<QuadJoint>) -> Result<Self> {
        let mut shape = (base.rows(), base.cols());
        for (t, s) in steps.iter().enumerate() {
            let [m, n, m1, n1] = s.dims();
            if (m, n) != shape {
                return Err(Error::ShapeMismatch(format!(
                    "step {t} starts from {m}x{n}, previous pair is {}x{}",
                    shape.0, shape.1
                )));
            }
            shape = (m1, n1);
        }
        Ok(Self { base, steps })
    }

    pub fn base(&self) -> &JointDistribution {
        &self.base
    }

    pub fn steps(&self) -> &[QuadJoint] {
        &self.steps
    }

    pub fn order(&self) -> usize {
        self.steps.len()
    }

    /// The last pair of the chain.
    pub fn final_pair(&self) -> DMatrix<f64> {
        self.steps.last().map_or_else(|| self.base.matrix().clone(), QuadJoint::next_marginal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub cmi_given_row: f64,
    pub cmi_given_col: f64,
    pub marginal_tv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub per_step: Vec<StepReport>,
    pub final_mi: f64,
    pub verdict: bool,
    pub tol: f64,
}

impl ValidationReport {
    pub fn max_step_cmi(&self) -> f64 {
        self.per_step.iter().map(|s| s.cmi_given_row.max(s.cmi_given_col)).fold(0.0, f64::max)
    }

    /// Steps whose quantities exceed the tolerance.
    pub fn failing_steps(&self) -> Vec<usize> {
        self.per_step.iter().enumerate().filter(|(_, s)| !step_ok(s, self.tol)).map(|(t, _)| t).collect()
    }
}

fn step_ok(s: &StepReport, tol: f64) -> bool {
    s.cmi_given_row <= tol && s.cmi_given_col <= tol && s.marginal_tv <= MARGINAL_TOL
}

pub fn validate_witness(w: &DerivationWitness, tol: f64) -> ValidationReport {
    let mut prev = w.base.matrix().clone();
    let mut per_step = Vec::with_capacity(w.steps.len());
    for s in &w.steps {
        let (cmi_given_row, cmi_given_col) = s.conditional_informations();
        let marginal_tv = tv(&s.pair_marginal(), &prev);
        per_step.push(StepReport { cmi_given_row, cmi_given_col, marginal_tv });
        prev = s.next_marginal();
    }
    let final_mi = match JointDistribution::new(prev.clone()) {
        Ok(j) => mutual_information(&j),
        Err(_) => pair_mi(&prev),
    };
    let verdict = per_step.iter().all(|s| step_ok(s, tol)) && final_mi <= tol;
    ValidationReport { per_step, final_mi, verdict, tol }
}

fn pair_mi(p: &DMatrix<f64>) -> f64 {
    let rows: Vec<f64> = (0..p.nrows()).map(|i| p.row(i).sum()).collect();
    let cols: Vec<f64> = (0..p.ncols()).map(|j| p.column(j).sum()).collect();
    clamp_bits(entropy(&rows) + entropy(&cols) - entropy(p.as_slice()))
}

pub fn independent_witness(j: &JointDistribution, tol: f64) -> Result<DerivationWitness> {
    let mi = mutual_information(j);
    if mi > tol {
        return Err(Error::NotIndependent { mi });
    }
    DerivationWitness::new(j.clone(), Vec::new())
}

fn check_map(f: &[usize], len: usize) -> Result<usize> {
    if f.len() != len {
        return Err(Error::BadMap(f.len().min(len)));
    }
    Ok(f.iter().copied().max().unwrap_or(0) + 1)
}

/// Pushes the base pair forward under `a -> f[a]`, `b -> g[b]`.
pub fn map_witness(w: &DerivationWitness, f: &[usize], g: &[usize]) -> Result<DerivationWitness> {
    let m_out = check_map(f, w.base.rows())?;
    let n_out = check_map(g, w.base.cols())?;
    map_witness_into(w, f, m_out, g, n_out)
}

/// `map_witness` onto alphabets of the given sizes.
pub fn map_witness_into(
    w: &DerivationWitness,
    f: &[usize],
    m_out: usize,
    g: &[usize],
    n_out: usize,
) -> Result<DerivationWitness> {
    if check_map(f, w.base.rows())? > m_out || check_map(g, w.base.cols())? > n_out {
        return Err(Error::ShapeMismatch(format!("map image exceeds {m_out}x{n_out}")));
    }
    let mut base = DMatrix::zeros(m_out, n_out);
    for a in 0..w.base.rows() {
        for b in 0..w.base.cols() {
            base[(f[a], g[b])] += w.base.get(a, b);
        }
    }
    let mut steps = w.steps.clone();
    if let Some(first) = w.steps.first() {
        let [m, n, m1, n1] = first.dims();
        let mut t = vec![0.0; m_out * n_out * m1 * n1];
        for a in 0..m {
            for b in 0..n {
                let src = (a * n + b) * m1 * n1;
                let dst = (f[a] * n_out + g[b]) * m1 * n1;
                for k in 0..m1 * n1 {
                    t[dst + k] += first.t[src + k];
                }
            }
        }
        steps[0] = QuadJoint::settle([m_out, n_out, m1, n1], t)?;
    }
    DerivationWitness::new(JointDistribution::settle(base)?, steps)
}

/// Extends the chain to order `l` with steps whose next pair is constant.
pub fn pad_witness(w: &DerivationWitness, l: usize) -> Result<DerivationWitness> {
    if l < w.order() {
        return Err(Error::OrderDecrease { from: w.order(), to: l });
    }
    let mut out = w.clone();
    let last = w.final_pair();
    let (m, n) = last.shape();
    let mut t = Vec::with_capacity(m * n);
    for a in 0..m {
        for b in 0..n {
            t.push(last[(a, b)]);
        }
    }
    let first_pad = QuadJoint::settle([m, n, 1, 1], t)?;
    if l > w.order() {
        out.steps.push(first_pad);
    }
    while out.order() < l {
        out.steps.push(QuadJoint::new([1, 1, 1, 1], vec![1.0])?);
    }
    Ok(out)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn quad_product(x: &QuadJoint, y: &QuadJoint) -> Result<QuadJoint> {
    let [m, n, m1, n1] = x.dims();
    let [p, q, p1, q1] = y.dims();
    let dims = [m * p, n * q, m1 * p1, n1 * q1];
    let mut t = vec![0.0; dims.iter().product()];
    for a in 0..m {
        for b in 0..n {
            for i in 0..m1 {
                for j in 0..n1 {
                    let vx = x.get(a, b, i, j);
                    if vx == 0.0 {
                        continue;
                    }
                    for a2 in 0..p {
                        for b2 in 0..q {
                            for i2 in 0..p1 {
                                for j2 in 0..q1 {
                                    let idx = (((a * p + a2) * dims[1] + (b * q + b2)) * dims[2] + (i * p1 + i2))
                                        * dims[3]
                                        + (j * q1 + j2);
                                    t[idx] = vx * y.get(a2, b2, i2, j2);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    QuadJoint::settle(dims, t)
}

/// Witness for the pair of independent copies, one from each input.
pub fn product_witness(w1: &DerivationWitness, w2: &DerivationWitness) -> Result<DerivationWitness> {
    let k = w1.order().max(w2.order());
    let w1 = pad_witness(w1, k)?;
    let w2 = pad_witness(w2, k)?;
    let base = JointDistribution::settle(kron(w1.base.matrix(), w2.base.matrix()))?;
    let steps = w1.steps.iter().zip(&w2.steps).map(|(x, y)| quad_product(x, y)).collect::<Result<Vec<_>>>()?;
    DerivationWitness::new(base, steps)
}

/// `n` independent copies of the witnessed pair.
pub fn power_witness(w: &DerivationWitness, n: usize) -> Result<DerivationWitness> {
    if n == 0 {
        return Err(Error::BadN);
    }
    let mut out = w.clone();
    for _ in 1..n {
        out = product_witness(&out, w)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{d_epsilon, d_epsilon_chain};

    #[test]
    fn order_zero_uniform_validates() {
        let w = independent_witness(&JointDistribution::uniform(2, 2), DEFAULT_TOL).unwrap();
        let r = validate_witness(&w, DEFAULT_TOL);
        assert!(r.verdict);
        assert_eq!(w.order(), 0);
    }

    #[test]
    fn chain_validates_and_perturbation_breaks_it() {
        let w = d_epsilon_chain(2);
        let r = validate_witness(&w, DEFAULT_TOL);
        assert!(r.verdict);
        assert!(r.max_step_cmi() <= 1e-10);

        let mut steps = w.steps().to_vec();
        let mut t = steps[1].entries().to_vec();
        t[3] += 1e-3;
        steps[1] = QuadJoint::settle(steps[1].dims(), t).unwrap();
        let bad = DerivationWitness::new(w.base().clone(), steps).unwrap();
        let r = validate_witness(&bad, DEFAULT_TOL);
        assert!(!r.verdict);
        assert!(r.failing_steps().contains(&1));
    }

    #[test]
    fn independent_witness_examples() {
        let prod = JointDistribution::product(&[0.3, 0.7], &[0.5, 0.5]).unwrap();
        assert_eq!(independent_witness(&prod, DEFAULT_TOL).unwrap().order(), 0);
        let d0 = d_epsilon(0.0).unwrap();
        assert!(matches!(independent_witness(&d0, DEFAULT_TOL), Err(Error::NotIndependent { .. })));
    }

    #[test]
    fn map_examples() {
        let w = d_epsilon_chain(1);
        assert_eq!(map_witness(&w, &[0, 1], &[0, 1]).unwrap(), w);
        assert!(matches!(map_witness(&w, &[0], &[0, 1]), Err(Error::BadMap(_))));

        let w4 = power_witness(&w, 2).unwrap();
        let merged = map_witness(&w4, &[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap();
        assert_eq!((merged.base().rows(), merged.base().cols()), (4, 2));
        for a in 0..4 {
            for b in 0..2 {
                let want = w4.base().get(a, 2 * b) + w4.base().get(a, 2 * b + 1);
                assert!((merged.base().get(a, b) - want).abs() < 1e-15);
            }
        }
        assert!(validate_witness(&merged, DEFAULT_TOL).verdict);
    }

    #[test]
    fn pad_examples() {
        let w = d_epsilon_chain(1);
        assert_eq!(pad_witness(&w, 1).unwrap(), w);
        assert!(matches!(pad_witness(&w, 0), Err(Error::OrderDecrease { .. })));
        let u = independent_witness(&JointDistribution::uniform(2, 2), DEFAULT_TOL).unwrap();
        let p = pad_witness(&u, 2).unwrap();
        assert_eq!(p.order(), 2);
        assert!(validate_witness(&p, DEFAULT_TOL).verdict);
    }

    #[test]
    fn product_examples() {
        let quarter = independent_witness(&d_epsilon(0.25).unwrap(), DEFAULT_TOL).unwrap();
        let sq = product_witness(&quarter, &quarter).unwrap();
        assert_eq!(sq.order(), 0);
        assert!(sq.base().matrix().iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));

        let w1 = d_epsilon_chain(1);
        let u = independent_witness(&JointDistribution::uniform(2, 2), DEFAULT_TOL).unwrap();
        let p = product_witness(&w1, &u).unwrap();
        assert_eq!(p.order(), 1);
        assert!(validate_witness(&p, DEFAULT_TOL).verdict);
        let want = w1.base().matrix().kronecker(&DMatrix::from_element(2, 2, 0.25));
        assert!((p.base().matrix() - want).abs().max() < 1e-15);

        let w3 = d_epsilon_chain(3);
        assert_eq!(product_witness(&w1, &w3).unwrap().order(), 3);
    }

    #[test]
    fn power_examples() {
        let w = d_epsilon_chain(1);
        assert_eq!(power_witness(&w, 1).unwrap(), w);
        assert!(matches!(power_witness(&w, 0), Err(Error::BadN)));
        let sq = power_witness(&w, 2).unwrap();
        let d = w.base();
        for a in 0..4 {
            for b in 0..4 {
                let want = d.get(a / 2, b / 2) * d.get(a % 2, b % 2);
                assert!((sq.base().get(a, b) - want).abs() < 1e-15);
            }
        }
    }
}
