//! Noisy-copy pairs `C(d, e) = (1 - e) diag(d) + e d d^T` and derivations between them.
//!
//! `C(d, e)` is the pair where `b` copies `a ~ d` and, with probability `e`, both are
//! redrawn independently from `d`. At `e = 1` the pair is independent. A step from
//! `C(d, e)` to `C(d, e')` writes `C(d, e) = sum_i d_i v_i v_i^T` with
//! `v_i = (1 - lam) e_i + lam d`, and in every cell couples the component weights
//! `q_i = d_i v_i(a) v_i(b)` with themselves. Each coupling has both marginals equal to
//! `q`, so the pair is conditionally independent given either coordinate of the next
//! pair, whose distribution is the sum of the couplings.

use nalgebra::DMatrix;

use crate::distribution::JointDistribution;
use crate::error::{Error, Result};
use crate::witness::{DerivationWitness, QuadJoint};

pub fn noisy_copy(d: &[f64], e: f64) -> DMatrix<f64> {
    let k = d.len();
    DMatrix::from_fn(k, k, |i, j| e * d[i] * d[j] + if i == j { (1.0 - e) * d[i] } else { 0.0 })
}

/// Smallest off-diagonal ratio `S_ij / (d_i d_j)`.
fn ratio(d: &[f64], s: &DMatrix<f64>) -> f64 {
    let k = d.len();
    let mut r = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                r = r.min(s[(i, j)] / (d[i] * d[j]));
            }
        }
    }
    r
}

/// Couplings for every cell, stored as `t[(a * k + b) * k * k + i * k + j]`.
struct Plan {
    t: Vec<f64>,
    next: DMatrix<f64>,
}

impl Plan {
    fn new(k: usize, t: Vec<f64>) -> Self {
        let mut next = DMatrix::zeros(k, k);
        for cell in t.chunks(k * k) {
            for i in 0..k {
                for j in 0..k {
                    next[(i, j)] += cell[i * k + j];
                }
            }
        }
        Self { t, next }
    }

    fn mix(&self, other: &Plan, w: f64) -> Plan {
        Plan {
            t: self.t.iter().zip(&other.t).map(|(x, y)| w * x + (1.0 - w) * y).collect(),
            next: &self.next * w + &other.next * (1.0 - w),
        }
    }
}

fn components(d: &[f64], lam: f64, a: usize, b: usize) -> Vec<f64> {
    let v = |i: usize, x: usize| lam * d[x] + if i == x { 1.0 - lam } else { 0.0 };
    (0..d.len()).map(|i| d[i] * v(i, a) * v(i, b)).collect()
}

/// `T (p p^T - theta u u^T)` with `p = q / T`, `u = p - d`, `theta` as large as
/// nonnegativity allows, capped at 1. At `theta = 1` the plan is `T (p d^T + d p^T - d d^T)`.
fn covariance_plan(q: &[f64], d: &[f64], out: &mut [f64]) {
    let k = q.len();
    let total: f64 = q.iter().sum();
    let p: Vec<f64> = q.iter().map(|v| v / total).collect();
    let u: Vec<f64> = p.iter().zip(d).map(|(p, d)| p - d).collect();
    let mut theta: f64 = 1.0;
    for i in 0..k {
        for j in 0..k {
            let o = u[i] * u[j];
            if o > 0.0 {
                theta = theta.min(p[i] * p[j] / o);
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = (total * (p[i] * p[j] - theta * u[i] * u[j])).max(0.0);
        }
    }
}

/// Symmetric coupling of `q` with itself that avoids the diagonal as far as possible.
fn anti_diagonal_plan(q: &[f64], out: &mut [f64]) {
    let k = q.len();
    let total: f64 = q.iter().sum();
    let top = (0..k).max_by(|&x, &y| q[x].total_cmp(&q[y])).unwrap_or(0);
    out.iter_mut().for_each(|v| *v = 0.0);
    if 2.0 * q[top] >= total {
        for i in 0..k {
            if i != top {
                out[top * k + i] = q[i];
                out[i * k + top] = q[i];
            }
        }
        out[top * k + top] = 2.0 * q[top] - total;
        return;
    }
    // Sinkhorn scaling of the all-ones kernel with zero diagonal.
    let mut u = vec![1.0; k];
    let mut v = vec![1.0; k];
    for _ in 0..5000 {
        let sv: f64 = v.iter().sum();
        for i in 0..k {
            u[i] = q[i] / (sv - v[i]);
        }
        let su: f64 = u.iter().sum();
        let mut err: f64 = 0.0;
        for j in 0..k {
            let nv = q[j] / (su - u[j]);
            err = err.max((nv - v[j]).abs() / nv);
            v[j] = nv;
        }
        if err < 1e-15 {
            break;
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                out[i * k + j] = 0.5 * (u[i] * v[j] + u[j] * v[i]);
            }
        }
    }
}

/// Coupling that sends the cell's own labels `a` and `b` to each other and routes every
/// other label through `a` and `b`.
fn swap_plan(q: &[f64], a: usize, b: usize, out: &mut [f64]) {
    let k = q.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let total: f64 = q.iter().sum();
    if a == b {
        let rest = total - q[a];
        if q[a] >= rest {
            for i in 0..k {
                if i != a {
                    out[a * k + i] = q[i];
                    out[i * k + a] = q[i];
                }
            }
            out[a * k + a] = q[a] - rest;
        } else {
            anti_diagonal_plan(q, out);
        }
        return;
    }
    let (qa, qb) = (q[a], q[b]);
    let rest = total - qa - qb;
    let f = if rest <= 0.0 { 1.0 } else { (2.0 * qa.min(qb) / rest).min(1.0) };
    for i in 0..k {
        if i == a || i == b {
            continue;
        }
        let h = f * q[i] / 2.0;
        out[a * k + i] += h;
        out[i * k + b] += h;
        out[b * k + i] += h;
        out[i * k + a] += h;
        out[i * k + i] += (1.0 - f) * q[i];
    }
    let ra = qa - f * rest / 2.0;
    let rb = qb - f * rest / 2.0;
    let shared = ra.min(rb).max(0.0);
    out[a * k + b] += shared;
    out[b * k + a] += shared;
    out[a * k + a] += (ra - shared).max(0.0);
    out[b * k + b] += (rb - shared).max(0.0);
}

fn build_plan(d: &[f64], lam: f64, cell_plan: impl Fn(&[f64], usize, usize, &mut [f64])) -> Plan {
    let k = d.len();
    let kk = k * k;
    let mut t = vec![0.0; kk * kk];
    for a in 0..k {
        for b in 0..k {
            let q = components(d, lam, a, b);
            cell_plan(&q, a, b, &mut t[(a * k + b) * kk..(a * k + b + 1) * kk]);
        }
    }
    Plan::new(k, t)
}

/// Best mixture weight of two plans for the off-diagonal ratio.
fn best_mix(d: &[f64], x: &Plan, y: &Plan) -> (f64, f64) {
    (0..=40)
        .map(|s| s as f64 / 40.0)
        .map(|w| (w, ratio(d, &(&x.next * w + &y.next * (1.0 - w)))))
        .fold((1.0, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// One step out of `C(d, e)`: returns the step tensor and the `e'` of the next pair.
pub(crate) fn noisy_step(d: &[f64], e: f64) -> (Vec<f64>, f64) {
    let k = d.len();
    let kk = k * k;
    let lam = 1.0 - (1.0 - e).sqrt();
    let cov = build_plan(d, lam, |q, _, _, out| covariance_plan(q, d, out));
    let swap = build_plan(d, lam, swap_plan);
    let (w, _) = best_mix(d, &cov, &swap);
    let plan = cov.mix(&swap, w);
    let mut reach = ratio(d, &plan.next).min(1.0);
    if reach > 1.0 - 1e-9 {
        // Rounding can stall the last step just short of independence.
        reach = 1.0;
    }

    // Trim the next pair to exactly C(d, reach): scale each off-diagonal coupling entry
    // by a symmetric factor and return the removed mass to the diagonal of its row.
    let mut keep = DMatrix::from_element(k, k, 1.0);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                keep[(i, j)] = (reach * d[i] * d[j] / plan.next[(i, j)]).min(1.0);
            }
        }
    }
    let mut t = plan.t;
    for cell in t.chunks_mut(kk) {
        for i in 0..k {
            let mut moved = 0.0;
            for j in 0..k {
                if i != j {
                    let v = cell[i * k + j];
                    let kept = v * keep[(i, j)];
                    moved += v - kept;
                    cell[i * k + j] = kept;
                }
            }
            cell[i * k + i] += moved;
        }
    }
    (t, reach)
}

/// Witness for `C(d, e)` running through noisy copies up to the independent pair.
pub fn noisy_chain(d: &[f64], e: f64, max_order: usize) -> Result<DerivationWitness> {
    if d.iter().any(|&x| x <= 0.0) || !(0.0..=1.0).contains(&e) || e == 0.0 {
        return Err(Error::OutOfRange(format!("noisy copy with e = {e}")));
    }
    let k = d.len();
    let base = JointDistribution::settle(noisy_copy(d, e))?;
    let mut steps = Vec::new();
    let mut cur = e;
    while cur < 1.0 {
        if steps.len() >= max_order {
            return Err(Error::OrderCapExceeded { needed: estimate_order(d, e), cap: max_order });
        }
        let (t, next) = noisy_step(d, cur);
        if next <= cur {
            return Err(Error::NoConvergence { iters: steps.len(), residual: cur });
        }
        steps.push(QuadJoint::settle([k, k, k, k], t)?);
        cur = next;
    }
    DerivationWitness::new(base, steps)
}

/// Rough number of steps `noisy_chain` needs, from the small-`e` growth `e' - e ~ d_min e^2 / 2`.
pub fn estimate_order(d: &[f64], e: f64) -> usize {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    (2.0 / (dmin * e)).ceil() as usize
}
