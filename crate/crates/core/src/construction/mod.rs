//! Derivation witnesses for non-block matrices.
//!
//! The route for a non-block `M`:
//! - independent `M` needs no steps;
//! - strictly positive `M` factors as `C(r, t) S` with `C(r, t)` a noisy copy of the row
//!   marginal and `S` stochastic, so the noisy-copy chain lifted by `S` is a witness;
//! - otherwise a block grid of rank-1 parts gives one step to a grid-mass matrix with
//!   fewer chain links, and the construction recurses on it.

mod grid;
pub mod noisy;

use nalgebra::DMatrix;

pub use noisy::{estimate_order, noisy_chain, noisy_copy};

use crate::distribution::{
    mutual_information, total_variation, JointDistribution, MassMatrix, RealMatrix, StochasticMatrix,
};
use crate::error::{Error, Result};
use crate::structure::{rank1_defect, require_nonblock};
use crate::witness::{
    independent_witness, map_witness_into, power_witness, validate_witness, DerivationWitness, QuadJoint,
    ValidationReport, DEFAULT_TOL, MARGINAL_TOL,
};

/// Tensor entries a construction may allocate before it gives up.
const MAX_WITNESS_ENTRIES: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Initial weight of the uniform matrix in `A = B = (1 - theta) I + theta J / n`.
    pub theta: f64,
    /// Step shrink factor when a correction leaves the positive stochastic matrices.
    pub damping: f64,
    pub max_iters: usize,
    pub residual_eta: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { theta: 0.05, damping: 0.5, max_iters: 100, residual_eta: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionConfig {
    /// Allowed total variation between the witness base and the target.
    pub delta: f64,
    /// Per-step conditional mutual information tolerance in bits.
    pub step_tol: f64,
    pub newton: NewtonConfig,
    pub max_order: usize,
    pub eps_schedule_halvings: u32,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self {
            delta: 1e-2,
            step_tol: DEFAULT_TOL,
            newton: NewtonConfig::default(),
            max_order: 50_000,
            eps_schedule_halvings: 60,
        }
    }
}

impl ConstructionConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.delta.is_nan() || self.delta <= 0.0 || self.delta > 1.0 {
            return bad("delta must lie in (0, 1]");
        }
        if self.step_tol.is_nan() || self.step_tol <= 0.0 {
            return bad("step tolerance must be positive");
        }
        if !(0.0..1.0).contains(&self.newton.theta) || self.newton.theta == 0.0 {
            return bad("theta must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.newton.damping) || self.newton.damping == 0.0 {
            return bad("damping must lie in (0, 1)");
        }
        if self.newton.max_iters == 0 {
            return bad("max iterations must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ConstructionResult {
    pub witness: DerivationWitness,
    /// Total variation between the witness base and the requested matrix.
    pub achieved_tv: f64,
    pub report: ValidationReport,
}

fn finish(witness: DerivationWitness, target: &JointDistribution, tol: f64) -> Result<ConstructionResult> {
    let achieved_tv = total_variation(witness.base(), target)?;
    let report = validate_witness(&witness, tol);
    Ok(ConstructionResult { witness, achieved_tv, report })
}

pub fn d_epsilon(eps: f64) -> Result<JointDistribution> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::OutOfRange(format!("eps = {eps} outside [0, 1/2]")));
    }
    JointDistribution::from_rows(&[vec![0.5 - eps, eps], vec![eps, 0.5 - eps]])
}

/// `eps_0 = 1/4`, `eps_{t+1} = eps_t (1 - eps_t)`.
pub fn epsilon_sequence(n: usize) -> f64 {
    (0..n).fold(0.25, |e, _| e * (1.0 - e))
}

/// One step from `D_{e(1-e)}` to `D_e`: diagonal outcomes of the next pair are copied,
/// off-diagonal ones are redrawn with weights `e/2, (1-e)/2, (1-e)/2, e/2`.
fn halving_step(e: f64) -> QuadJoint {
    let next = [[0.5 - e, e], [e, 0.5 - e]];
    let redraw = [[e / 2.0, (1.0 - e) / 2.0], [(1.0 - e) / 2.0, e / 2.0]];
    let mut t = vec![0.0; 16];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let given = if i == j { f64::from(u8::from(a == i && b == j)) } else { redraw[a][b] };
                    t[((a * 2 + b) * 2 + i) * 2 + j] = next[i][j] * given;
                }
            }
        }
    }
    QuadJoint::new([2, 2, 2, 2], t).expect("halving step is a distribution")
}

/// Order-`n` witness for `D_{eps_n}`.
pub fn d_epsilon_chain(n: usize) -> DerivationWitness {
    let eps: Vec<f64> = (0..=n).map(epsilon_sequence).collect();
    let base = d_epsilon(eps[n]).expect("eps_n lies in (0, 1/4]");
    let steps = (0..n).rev().map(|t| halving_step(eps[t])).collect();
    DerivationWitness::new(base, steps).expect("halving steps chain")
}

fn dyadic_counts(j: &JointDistribution, level: u32) -> Vec<u64> {
    let total = 2f64.powi(level as i32);
    let scaled: Vec<f64> = j.to_joint().probs().iter().map(|p| p * total).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let missing = (1u64 << level).saturating_sub(assigned) as usize;
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&x, &y| (scaled[y] - scaled[y].floor()).total_cmp(&(scaled[x] - scaled[x].floor())));
    for &k in order.iter().take(missing) {
        counts[k] += 1;
    }
    counts
}

/// Largest-remainder rounding to multiples of `2^-level`.
pub fn dyadic_approx(j: &JointDistribution, level: u32) -> JointDistribution {
    let total = 2f64.powi(level as i32);
    let counts = dyadic_counts(j, level);
    let p = DMatrix::from_row_iterator(j.rows(), j.cols(), counts.iter().map(|&c| c as f64 / total));
    JointDistribution::new(p).expect("counts sum to 2^level")
}

/// Maps from `level`-bit strings to rows and columns: the cell `(i, j)` receives
/// `2^level d(i, j)` consecutive strings in row-major order.
pub fn bernoulli_encoding(d: &JointDistribution, level: u32) -> Result<(Vec<usize>, Vec<usize>)> {
    let total = 2f64.powi(level as i32);
    let mut f = Vec::with_capacity(1 << level);
    let mut g = Vec::with_capacity(1 << level);
    for i in 0..d.rows() {
        for jj in 0..d.cols() {
            let s = d.get(i, jj) * total;
            if (s - s.round()).abs() > 1e-9 {
                return Err(Error::NotDyadic { row: i, col: jj, level });
            }
            for _ in 0..s.round() as usize {
                f.push(i);
                g.push(jj);
            }
        }
    }
    if f.len() != 1 << level {
        return Err(Error::NotDyadic { row: 0, col: 0, level });
    }
    Ok((f, g))
}

/// Witness for a matrix close to `j`: powers of the `D_eps` chain pushed through a
/// Bernoulli encoding of a dyadic rounding of `j`.
pub fn approximate_good(j: &JointDistribution, delta: f64) -> Result<ConstructionResult> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidConfig("delta must be positive".into()));
    }
    if mutual_information(j) <= 1e-12 {
        return finish(independent_witness(j, 1e-12)?, j, DEFAULT_TOL);
    }
    let level = (0..=30u32)
        .find(|&n| total_variation(&dyadic_approx(j, n), j).is_ok_and(|tv| tv <= delta / 2.0))
        .ok_or_else(|| Error::TooLarge("no dyadic level within budget".into()))?;
    let dyadic = dyadic_approx(j, level);
    if level == 0 {
        return finish(independent_witness(&dyadic, 0.0)?, j, DEFAULT_TOL);
    }
    let n = level as usize;
    let t = (0..).find(|&t| 2.0 * epsilon_sequence(t) * n as f64 <= delta / 2.0).unwrap_or(0);
    let entries = 16f64.powi(level as i32) * t as f64;
    if entries > 5e7 {
        return Err(Error::TooLarge(format!("{n} copies of an order-{t} chain")));
    }
    let (f, g) = bernoulli_encoding(&dyadic, level)?;
    let power = power_witness(&d_epsilon_chain(t), n)?;
    let witness = map_witness_into(&power, &f, j.rows(), &g, j.cols())?;
    finish(witness, j, DEFAULT_TOL)
}

/// Witness for `A^T M B` from a witness for `M`: the pair `(a, b)` is replaced by
/// independent transitions `a -> a'` with law `A[a, .]` and `b -> b'` with law `B[b, .]`.
pub fn stochastic_lift(w: &DerivationWitness, a: &StochasticMatrix, b: &StochasticMatrix) -> Result<DerivationWitness> {
    let (m, n) = (w.base().rows(), w.base().cols());
    if a.rows() != m || b.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "{m}x{n} base with {}-row and {}-row transitions",
            a.rows(),
            b.rows()
        )));
    }
    let (am, bm) = (a.matrix(), b.matrix());
    let base = JointDistribution::settle(am.transpose() * w.base().matrix() * bm)?;
    let mut steps = w.steps().to_vec();
    if let Some(first) = w.steps().first() {
        let [_, _, m1, n1] = first.dims();
        let (mo, no) = (a.cols(), b.cols());
        let mut t = vec![0.0; mo * no * m1 * n1];
        for i in 0..m1 {
            for j in 0..n1 {
                let x = DMatrix::from_fn(m, n, |p, q| first.get(p, q, i, j));
                let y = am.transpose() * x * bm;
                for p in 0..mo {
                    for q in 0..no {
                        t[((p * no + q) * m1 + i) * n1 + j] = y[(p, q)];
                    }
                }
            }
        }
        steps[0] = QuadJoint::settle([mo, no, m1, n1], t)?;
    }
    DerivationWitness::new(base, steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    /// `R = P^T M + M Q`
    Plus,
    /// `R = -P^T M - M Q`
    Minus,
}

/// Solves `R = ±(P^T M + M Q)` with zero row sums in `P` and `Q`.
pub fn solve_correction(m: &RealMatrix, r: &RealMatrix, sign: Sign) -> Result<(RealMatrix, RealMatrix)> {
    let n = m.nrows();
    if m.ncols() != n || r.shape() != (n, n) {
        return Err(Error::SingularM);
    }
    if r.sum().abs() > 1e-10 {
        return Err(Error::NonzeroSum(r.sum()));
    }
    let inv = singular_guard(m)?;
    let mean = DMatrix::from_fn(1, n, |_, j| r.column(j).mean());
    let q_prime = DMatrix::from_fn(n, n, |_, j| mean[(0, j)]);
    let p_prime = (r - &q_prime).transpose();
    let mut p = inv.transpose() * p_prime;
    let mut q = &inv * q_prime;
    if sign == Sign::Minus {
        p = -p;
        q = -q;
    }
    // Row sums vanish in exact arithmetic; remove the rounding residue.
    for x in [&mut p, &mut q] {
        for i in 0..n {
            let s = x.row(i).sum() / n as f64;
            x.row_mut(i).add_scalar_mut(-s);
        }
    }
    Ok((p, q))
}

fn singular_guard(m: &RealMatrix) -> Result<RealMatrix> {
    let sv = m.clone().singular_values();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if hi == 0.0 || lo / hi < 1e-12 {
        return Err(Error::SingularM);
    }
    m.clone().try_inverse().ok_or(Error::SingularM)
}

/// Minimum of `M_ab / (r_a c_b)`.
fn min_ratio(m: &JointDistribution) -> f64 {
    let (r, c) = (m.row_marginal(), m.col_marginal());
    let mut out = f64::INFINITY;
    for a in 0..m.rows() {
        for b in 0..m.cols() {
            out = out.min(m.get(a, b) / (r[a] * c[b]));
        }
    }
    out
}

fn first_zero(m: &JointDistribution) -> Option<(usize, usize)> {
    (0..m.rows()).flat_map(|a| (0..m.cols()).map(move |b| (a, b))).find(|&(a, b)| m.get(a, b) <= 0.0)
}

/// Stochastic factors and the good middle matrix of a positive nonsingular `M = A^T G B`.
#[derive(Clone, Debug)]
pub struct Factored {
    pub result: ConstructionResult,
    pub a: StochasticMatrix,
    pub b: StochasticMatrix,
    pub g: JointDistribution,
}

fn residual(a: &RealMatrix, g: &RealMatrix, b: &RealMatrix, m: &RealMatrix) -> (RealMatrix, f64) {
    let r = m - a.transpose() * g * b;
    let max = r.amax();
    (r, max)
}

fn normalize_rows(x: &mut RealMatrix) {
    for i in 0..x.nrows() {
        let s = x.row(i).sum();
        x.row_mut(i).unscale_mut(s);
    }
}

/// Finds stochastic `A, B` with `A^T G B = M` for the noisy copy `G = C(d, e)`, by
/// multiplicative updates followed by damped corrections from `solve_correction`.
fn fit_factors(m: &RealMatrix, g: &RealMatrix, cfg: &NewtonConfig) -> Result<(RealMatrix, RealMatrix, f64)> {
    let n = m.nrows();
    let start = DMatrix::identity(n, n) * (1.0 - cfg.theta) + DMatrix::from_element(n, n, cfg.theta / n as f64);
    let (mut a, mut b) = (start.clone(), start);
    for _ in 0..20_000 {
        let fit = a.transpose() * g * &b;
        if (m - &fit).amax() < 1e-10 {
            break;
        }
        let w = m.component_div(&fit);
        let mut an = a.component_mul(&(g * &b * w.transpose()));
        let mut bn = b.component_mul(&(g.transpose() * &a * &w));
        normalize_rows(&mut an);
        normalize_rows(&mut bn);
        a = an;
        b = bn;
    }
    let (mut r, mut res) = residual(&a, g, &b, m);
    for _ in 0..cfg.max_iters {
        if res < 1e-15 {
            break;
        }
        let fit = a.transpose() * g * &b;
        let Ok((p, q)) = solve_correction(&fit, &r, Sign::Plus) else { break };
        let mut s = 1.0;
        let mut improved = false;
        while s > 1e-6 {
            let na = &a + (&a * &p) * s;
            let nb = &b + (&b * &q) * s;
            if na.min() > 0.0 && nb.min() > 0.0 {
                let (nr, nres) = residual(&na, g, &nb, m);
                if nres < res {
                    (a, b, r, res) = (na, nb, nr, nres);
                    improved = true;
                    break;
                }
            }
            s *= cfg.damping;
        }
        if !improved {
            break;
        }
    }
    Ok((a, b, res))
}

/// Positive nonsingular `M` as `A^T G B` with `A, B` positive stochastic and `G` a noisy
/// copy whose derivation is known; the witness is the lifted noisy-copy chain.
pub fn positive_nonsingular_witness(m: &JointDistribution, cfg: &ConstructionConfig) -> Result<Factored> {
    cfg.check()?;
    if m.rows() != m.cols() {
        return Err(Error::SingularM);
    }
    if let Some((row, col)) = first_zero(m) {
        return Err(Error::ZeroEntry { row, col });
    }
    singular_guard(m.matrix())?;
    let (r, c) = (m.row_marginal(), m.col_marginal());
    let d: Vec<f64> = r.iter().zip(&c).map(|(x, y)| (x + y) / 2.0).collect();
    let ratio = min_ratio(m);
    let mut last = f64::INFINITY;
    for f in [0.5, 0.25, 0.1, 0.05] {
        let e = f * ratio;
        let g = noisy_copy(&d, e);
        let (a, b, res) = fit_factors(m.matrix(), &g, &cfg.newton)?;
        last = last.min(res);
        if res > cfg.newton.residual_eta || a.min() <= 0.0 || b.min() <= 0.0 {
            continue;
        }
        check_budget(&d, e, cfg.max_order)?;
        let chain = noisy_chain(&d, e, cfg.max_order)?;
        let (a, b) = (StochasticMatrix::settle(a)?, StochasticMatrix::settle(b)?);
        let witness = stochastic_lift(&chain, &a, &b)?;
        let result = finish(witness, m, cfg.step_tol)?;
        return Ok(Factored { result, a, b, g: chain.base().clone() });
    }
    Err(Error::NoConvergence { iters: cfg.newton.max_iters, residual: last })
}

fn check_budget(d: &[f64], e: f64, max_order: usize) -> Result<()> {
    let needed = estimate_order(d, e);
    let k = d.len();
    if needed > max_order || needed.saturating_mul(k.pow(4)) > MAX_WITNESS_ENTRIES {
        return Err(Error::OrderCapExceeded { needed, cap: max_order });
    }
    Ok(())
}

/// Positive `M` of any shape as `C(r, t) S` with `t = min M_ab / (r_a c_b)`: the
/// noisy copy `C(r, t)` is positive and nonsingular, and `S = (R - t 1 c^T) / (1 - t)`
/// (with `R` the row-normalized `M`) is stochastic. The transposed factorization is
/// used when it is cheaper.
pub fn positive_witness(m: &JointDistribution, cfg: &ConstructionConfig) -> Result<ConstructionResult> {
    cfg.check()?;
    if let Some((row, col)) = first_zero(m) {
        return Err(Error::ZeroEntry { row, col });
    }
    let t = min_ratio(m);
    if t >= 1.0 - 1e-12 || mutual_information(m) <= 1e-15 {
        return finish(independent_witness(m, cfg.step_tol)?, m, cfg.step_tol);
    }
    let (r, c) = (m.row_marginal(), m.col_marginal());
    let cost = |d: &[f64]| (d.len().pow(4) as f64) * estimate_order(d, t) as f64;
    let by_rows = cost(&r) <= cost(&c);
    let (d, other) = if by_rows { (&r, &c) } else { (&c, &r) };
    check_budget(d, t, cfg.max_order)?;
    let chain = noisy_chain(d, t, cfg.max_order)?;
    let s = DMatrix::from_fn(d.len(), other.len(), |x, y| {
        let mass = if by_rows { m.get(x, y) } else { m.get(y, x) };
        (mass / d[x] - t * other[y]) / (1.0 - t)
    });
    let s = StochasticMatrix::settle(s)?;
    let witness = if by_rows {
        stochastic_lift(&chain, &StochasticMatrix::identity(d.len()), &s)?
    } else {
        stochastic_lift(&chain, &s, &StochasticMatrix::identity(d.len()))?
    };
    finish(witness, m, cfg.step_tol)
}

/// Prepends the grid step `Pr(a, b, a* = i, b* = j) = N_ij(a, b)` to a witness for the
/// grid masses `S(N_ij)`.
pub fn block_compose(grid: &[Vec<MassMatrix>], inner: &DerivationWitness) -> Result<DerivationWitness> {
    let k1 = grid.len();
    let k2 = grid.first().map_or(0, Vec::len);
    if k1 == 0 || k2 == 0 || grid.iter().any(|row| row.len() != k2) {
        return Err(Error::ShapeMismatch("empty or ragged grid".into()));
    }
    let (m, n) = grid[0][0].shape();
    if grid.iter().flatten().any(|b| b.shape() != (m, n)) {
        return Err(Error::ShapeMismatch("grid blocks differ in shape".into()));
    }
    for i in 0..k1 {
        let line = grid[i].iter().fold(DMatrix::zeros(m, n), |acc, x| acc + x);
        if rank1_defect(&line) > 1e-9 {
            return Err(Error::RowColNotRank1(format!("row {i}")));
        }
    }
    for j in 0..k2 {
        let line = grid.iter().fold(DMatrix::zeros(m, n), |acc, row| acc + &row[j]);
        if rank1_defect(&line) > 1e-9 {
            return Err(Error::RowColNotRank1(format!("column {j}")));
        }
    }
    let mut t = vec![0.0; m * n * k1 * k2];
    for i in 0..k1 {
        for j in 0..k2 {
            for a in 0..m {
                for b in 0..n {
                    t[((a * n + b) * k1 + i) * k2 + j] = grid[i][j][(a, b)];
                }
            }
        }
    }
    let step = QuadJoint::new([m, n, k1, k2], t)?;
    compose_step(step, inner)
}

fn compose_step(step: QuadJoint, inner: &DerivationWitness) -> Result<DerivationWitness> {
    let masses = step.next_marginal();
    let base = inner.base().matrix();
    if masses.shape() != base.shape() {
        return Err(Error::ShapeMismatch(format!("grid {:?} vs witness base {:?}", masses.shape(), base.shape())));
    }
    let gap = 0.5 * (masses - base).abs().sum();
    if gap > MARGINAL_TOL {
        return Err(Error::MassMismatch(gap));
    }
    let outer = JointDistribution::settle(step.pair_marginal())?;
    let mut steps = Vec::with_capacity(inner.order() + 1);
    steps.push(step);
    steps.extend(inner.steps().iter().cloned());
    DerivationWitness::new(outer, steps)
}

fn derive_witness(m: &JointDistribution, cfg: &ConstructionConfig, budget: usize) -> Result<DerivationWitness> {
    if mutual_information(m) <= cfg.step_tol {
        return independent_witness(m, cfg.step_tol);
    }
    if m.is_strictly_positive() {
        let sub = ConstructionConfig { max_order: budget, ..cfg.clone() };
        return Ok(positive_witness(m, &sub)?.witness);
    }
    if budget <= 1 {
        return Err(Error::OrderCapExceeded { needed: 2, cap: cfg.max_order });
    }
    let level = grid::product_grid(m)?;
    let inner = derive_witness(&level.masses, cfg, budget - 1)?;
    compose_step(level.step, &inner)
}

/// Witness for `(1 - s) M + s r c^T`, which is strictly positive and lies within
/// `0.9 delta` of `M` in total variation.
fn smoothed_witness(m: &JointDistribution, cfg: &ConstructionConfig) -> Result<DerivationWitness> {
    let (r, c) = (m.row_marginal(), m.col_marginal());
    let product = JointDistribution::product(&r, &c)?;
    let gap = total_variation(m, &product)?;
    let s = (0.9 * cfg.delta / gap).min(1.0);
    let mixed = JointDistribution::settle(m.matrix() * (1.0 - s) + product.matrix() * s)?;
    Ok(positive_witness(&mixed, cfg)?.witness)
}

/// Witness for a non-block `M`, validated at `cfg.step_tol`. When the exact route needs
/// more than `cfg.max_order` steps, the witness is built for a positive mixture of `M`
/// and the product of its marginals inside the `cfg.delta` budget.
pub fn derive_nonblock(m: &JointDistribution, cfg: &ConstructionConfig) -> Result<ConstructionResult> {
    cfg.check()?;
    require_nonblock(m)?;
    let witness = match derive_witness(m, cfg, cfg.max_order) {
        Err(Error::OrderCapExceeded { .. }) => smoothed_witness(m, cfg)?,
        other => other?,
    };
    let result = finish(witness, m, cfg.step_tol)?;
    if !result.report.verdict {
        return Err(Error::NoConvergence { iters: result.witness.order(), residual: result.report.max_step_cmi() });
    }
    if result.achieved_tv > cfg.delta {
        return Err(Error::NoConvergence { iters: result.witness.order(), residual: result.achieved_tv });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::rank1_split;

    fn joint(rows: &[Vec<f64>]) -> JointDistribution {
        JointDistribution::from_rows(rows).unwrap()
    }

    #[test]
    fn d_epsilon_examples() {
        assert_eq!(d_epsilon(0.25).unwrap(), JointDistribution::uniform(2, 2));
        assert_eq!(d_epsilon(0.0).unwrap().get(0, 1), 0.0);
        assert!(matches!(d_epsilon(0.6), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn d_epsilon_chain_examples() {
        assert_eq!(d_epsilon_chain(0).order(), 0);
        assert_eq!(d_epsilon_chain(0).base(), &JointDistribution::uniform(2, 2));
        let w1 = d_epsilon_chain(1);
        assert_eq!(w1.order(), 1);
        assert!((w1.base().get(0, 1) - 3.0 / 16.0).abs() < 1e-15);
        let w2 = d_epsilon_chain(2);
        assert!((w2.base().get(0, 1) - 39.0 / 256.0).abs() < 1e-15);
        for w in [w1, w2] {
            let r = validate_witness(&w, 1e-10);
            assert!(r.verdict);
        }
    }

    #[test]
    fn dyadic_examples() {
        let quarter = joint(&[vec![0.25, 0.25], vec![0.5, 0.0]]);
        assert_eq!(dyadic_approx(&quarter, 2), quarter);
        let third = joint(&[vec![1.0 / 3.0, 1.0 / 3.0], vec![0.0, 1.0 / 3.0]]);
        let d = dyadic_approx(&third, 4);
        assert_eq!(d.to_rows(), vec![vec![6.0 / 16.0, 5.0 / 16.0], vec![0.0, 5.0 / 16.0]]);
        let coarse = dyadic_approx(&joint(&[vec![0.1, 0.2], vec![0.3, 0.4]]), 0);
        assert_eq!(coarse.to_rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn bernoulli_examples() {
        let d0 = d_epsilon(0.0).unwrap();
        assert_eq!(bernoulli_encoding(&d0, 1).unwrap(), (vec![0, 1], vec![0, 1]));
        let u = JointDistribution::uniform(2, 2);
        assert_eq!(bernoulli_encoding(&u, 2).unwrap(), (vec![0, 0, 1, 1], vec![0, 1, 0, 1]));
        let odd = joint(&[vec![0.3, 0.7]]);
        assert!(matches!(bernoulli_encoding(&odd, 3), Err(Error::NotDyadic { .. })));
    }

    #[test]
    fn approximate_good_examples() {
        let flat = joint(&[vec![0.3, 0.3], vec![0.2, 0.2]]);
        let r = approximate_good(&flat, 0.05).unwrap();
        assert_eq!(r.witness.order(), 0);
        assert!(r.achieved_tv < 1e-15);

        let m = joint(&[vec![0.4, 0.1], vec![0.2, 0.3]]);
        let r = approximate_good(&m, 1.0).unwrap();
        assert!(r.report.verdict);
        assert!(r.achieved_tv <= 1.0);

        let r = approximate_good(&m, 0.3).unwrap();
        assert!(r.report.verdict);
        assert!(r.achieved_tv <= 0.3, "{}", r.achieved_tv);
    }

    #[test]
    fn lift_examples() {
        let w = d_epsilon_chain(1);
        let id = StochasticMatrix::identity(2);
        assert_eq!(stochastic_lift(&w, &id, &id).unwrap().base(), w.base());
        let half = StochasticMatrix::new(DMatrix::from_element(2, 2, 0.5)).unwrap();
        let lifted = stochastic_lift(&w, &half, &half).unwrap();
        assert!(lifted.base().matrix().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(validate_witness(&lifted, 1e-10).verdict);
    }

    #[test]
    fn correction_examples() {
        let id = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        let (p, q) = solve_correction(&id, &r, Sign::Plus).unwrap();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 0.5, -0.5]));
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        assert!((p.transpose() + q - &r).amax() < 1e-15);

        let (p, q) = solve_correction(&id, &DMatrix::zeros(2, 2), Sign::Minus).unwrap();
        assert_eq!(p.amax(), 0.0);
        assert_eq!(q.amax(), 0.0);

        let singular = DMatrix::from_element(2, 2, 0.25);
        assert!(matches!(solve_correction(&singular, &r, Sign::Plus), Err(Error::SingularM)));
        let unbalanced = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(solve_correction(&id, &unbalanced, Sign::Plus), Err(Error::NonzeroSum(_))));
    }

    #[test]
    fn newton_examples() {
        let cfg = ConstructionConfig::default();
        for m in [d_epsilon(3.0 / 16.0).unwrap(), joint(&[vec![0.4, 0.1], vec![0.1, 0.4]])] {
            let f = positive_nonsingular_witness(&m, &cfg).unwrap();
            assert!(f.result.report.verdict);
            let back = f.a.matrix().transpose() * f.g.matrix() * f.b.matrix();
            assert!((back - m.matrix()).amax() <= cfg.newton.residual_eta);
            assert!(f.result.achieved_tv <= cfg.delta);
            assert!(f.a.matrix().min() > 0.0 && f.b.matrix().min() > 0.0);
        }
        let outer = JointDistribution::product(&[0.3, 0.7], &[0.4, 0.6]).unwrap();
        assert!(matches!(positive_nonsingular_witness(&outer, &cfg), Err(Error::SingularM)));
    }

    #[test]
    fn positive_witness_examples() {
        let cfg = ConstructionConfig::default();
        let sq = joint(&[vec![0.4, 0.1], vec![0.1, 0.4]]);
        let r = positive_witness(&sq, &cfg).unwrap();
        assert!(r.report.verdict && r.achieved_tv < 1e-12);

        let tall = joint(&[vec![0.2, 0.1], vec![0.1, 0.2], vec![0.25, 0.15]]);
        let r = positive_witness(&tall, &cfg).unwrap();
        assert!(r.report.verdict && r.achieved_tv < 1e-12);

        let zero = joint(&[vec![0.5, 0.0], vec![0.25, 0.25]]);
        assert!(matches!(positive_witness(&zero, &cfg), Err(Error::ZeroEntry { .. })));
    }

    #[test]
    fn block_compose_examples() {
        let third = 1.0 / 3.0;
        let z = DMatrix::zeros(2, 2);
        let mut n11 = z.clone();
        n11[(0, 0)] = third;
        let mut n12 = z.clone();
        n12[(0, 1)] = third / 2.0;
        let mut n22 = z.clone();
        n22[(1, 1)] = third;
        let grid = vec![vec![n11, n12.clone()], vec![n12, n22]];
        let masses = joint(&[vec![third, third / 2.0], vec![third / 2.0, third]]);
        let inner = positive_witness(&masses, &ConstructionConfig::default()).unwrap().witness;
        let w = block_compose(&grid, &inner).unwrap();
        assert_eq!(w.order(), inner.order() + 1);
        let want = DMatrix::from_row_slice(2, 2, &[third, third, 0.0, third]);
        assert!((w.base().matrix() - want).amax() < 1e-15);
        assert!(validate_witness(&w, DEFAULT_TOL).verdict);

        let point = independent_witness(&joint(&[vec![1.0]]), 0.0).unwrap();
        let rank1 = vec![vec![DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]) * 1.0]];
        let product = DMatrix::from_row_slice(2, 1, &[0.3, 0.7]) * DMatrix::from_row_slice(1, 2, &[0.4, 0.6]);
        assert!(matches!(block_compose(&rank1, &point), Err(Error::RowColNotRank1(_))));
        let w = block_compose(&[vec![product]], &point).unwrap();
        assert_eq!(w.order(), 1);
        assert!(validate_witness(&w, DEFAULT_TOL).verdict);
    }

    #[test]
    fn rank1_parts_feed_a_grid() {
        let m = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.1]);
        assert_eq!(rank1_split(&m).unwrap().len(), 4);
    }

    #[test]
    fn derive_examples() {
        let cfg = ConstructionConfig::default();
        let tri = joint(&[vec![0.4, 0.3], vec![0.0, 0.3]]);
        let r = derive_nonblock(&tri, &cfg).unwrap();
        assert!(r.report.verdict);
        assert!(r.achieved_tv <= 1e-2);

        let pos = joint(&[vec![0.1, 0.05, 0.15], vec![0.12, 0.08, 0.1], vec![0.2, 0.1, 0.1]]);
        let r = derive_nonblock(&pos, &cfg).unwrap();
        assert!(r.report.verdict);

        assert!(matches!(derive_nonblock(&d_epsilon(0.0).unwrap(), &cfg), Err(Error::IsBlock(_))));
    }
}
