//! One level of the block-grid reduction for matrices with zeros.
//!
//! The matrix is written as a chain of r-matrices, each split into rank-1 parts `q_k`
//! with the same rectangular support. The grid entry for parts `k, l` is the product
//! coupling `N_kl(c) = q_k(c) q_l(c) / M(c)`, so grid row `k` sums to `q_k` and grid
//! column `l` sums to `q_l`. Parts that share a cell get a positive grid mass, which
//! links consecutive summands of the chain.

use crate::distribution::JointDistribution;
use crate::error::Result;
use crate::structure::{chain_decomposition, compact_rank1_split};
use crate::witness::QuadJoint;

pub(crate) struct GridLevel {
    /// `(a, b, k, l)` joint of a cell of the input and a grid position.
    pub step: QuadJoint,
    /// Grid masses: the next pair of the derivation.
    pub masses: JointDistribution,
}

pub(crate) fn product_grid(m: &JointDistribution) -> Result<GridLevel> {
    let decomposition = chain_decomposition(m)?;
    let mut parts = Vec::new();
    for summand in &decomposition.summands {
        parts.extend(compact_rank1_split(summand)?);
    }
    let (rows, cols) = (m.rows(), m.cols());
    let k = parts.len();
    let mut t = vec![0.0; rows * cols * k * k];
    for a in 0..rows {
        for b in 0..cols {
            let q: Vec<f64> = parts.iter().map(|p| p[(a, b)]).collect();
            let total: f64 = q.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let cell = &mut t[(a * cols + b) * k * k..(a * cols + b + 1) * k * k];
            for x in 0..k {
                for y in 0..k {
                    cell[x * k + y] = q[x] * q[y] / total;
                }
            }
        }
    }
    let step = QuadJoint::settle([rows, cols, k, k], t)?;
    let masses = JointDistribution::settle(step.next_marginal())?;
    Ok(GridLevel { step, masses })
}
