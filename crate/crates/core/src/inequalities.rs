//! Entropy inequalities forced by a derivation of order `k`, and oracles around them.
//!
//! If `(a, b)` has a derivation of order `k` and `g` is any variable coupled to `(a, b)`,
//! then `H(g) <= 2^k (H(g|a) + H(g|b))`, and with the conditional term
//! `H(g) <= 2^k H(g|a) + 2^k H(g|b) - (2^(k+1) - 1) H(g|ab)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::distribution::{gamma_report, GammaCoupling, InfoReport, JointDistribution};
use crate::error::{Error, Result};
use crate::structure::{block_split, Blockness};
use crate::witness::DerivationWitness;

/// Slack below which a bound counts as violated.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

impl BoundVerdict {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self { lhs, rhs, holds: slack >= -VIOLATION_TOL, slack }
    }
}

/// Channel rates in bits per symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl RatePoint {
    pub fn new(u: f64, v: f64, w: f64) -> Result<Self> {
        if [u, v, w].iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::NegativeRate);
        }
        Ok(Self { u, v, w })
    }
}

struct GammaEntropies {
    h: f64,
    given_a: f64,
    given_b: f64,
    given_ab: f64,
}

fn gamma_entropies(j: &JointDistribution, g: &GammaCoupling) -> Result<GammaEntropies> {
    let report = gamma_report(j, g)?;
    let get = |label: &str| report.get(label).unwrap_or(0.0);
    Ok(GammaEntropies { h: get("H(g)"), given_a: get("H(g|a)"), given_b: get("H(g|b)"), given_ab: get("H(g|ab)") })
}

fn scale(k: u32) -> f64 {
    2f64.powi(k as i32)
}

pub fn check_theorem1(j: &JointDistribution, g: &GammaCoupling, k: u32) -> Result<BoundVerdict> {
    let e = gamma_entropies(j, g)?;
    Ok(BoundVerdict::new(e.h, scale(k) * (e.given_a + e.given_b)))
}

pub fn check_theorem3(j: &JointDistribution, g: &GammaCoupling, k: u32) -> Result<BoundVerdict> {
    let e = gamma_entropies(j, g)?;
    let rhs = scale(k) * (e.given_a + e.given_b) - (2.0 * scale(k) - 1.0) * e.given_ab;
    let verdict = BoundVerdict::new(e.h, rhs);
    let info = theorem3_information_form(j, g, k)?;
    debug_assert!((info.slack - verdict.slack).abs() <= 1e-10 * (1.0 + scale(k)));
    Ok(verdict)
}

/// `I(g:ab) <= 2^k I(g:a|b) + 2^k I(g:b|a)`, the same inequality in information form.
pub fn theorem3_information_form(j: &JointDistribution, g: &GammaCoupling, k: u32) -> Result<BoundVerdict> {
    let e = gamma_entropies(j, g)?;
    let lhs = e.h - e.given_ab;
    let rhs = scale(k) * ((e.given_b - e.given_ab) + (e.given_a - e.given_ab));
    Ok(BoundVerdict::new(lhs, rhs))
}

/// `H(g) / (H(g|a) + H(g|b))`, infinite when only the numerator is positive.
pub fn entropy_ratio(j: &JointDistribution, g: &GammaCoupling) -> Result<f64> {
    let e = gamma_entropies(j, g)?;
    let denom = e.given_a + e.given_b;
    Ok(if e.h <= 1e-12 {
        0.0
    } else if denom <= 1e-12 {
        f64::INFINITY
    } else {
        e.h / denom
    })
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// Map maximizing `lhs - rhs` of the order-`k` bound.
    pub worst: GammaCoupling,
    pub verdict: BoundVerdict,
    /// Largest entropy ratio over all maps.
    pub max_ratio: f64,
}

fn check_sweep(j: &JointDistribution, max_range: usize) -> Result<()> {
    let cells = j.rows() * j.cols();
    if cells > 9 || max_range > 4 || max_range == 0 {
        return Err(Error::TooLarge(format!("sweep over {cells} cells into range {max_range}")));
    }
    Ok(())
}

/// Every deterministic map from cells to `0..max_range`, tested against the order-`k` bound.
pub fn gamma_sweep(j: &JointDistribution, k: u32, max_range: usize) -> Result<SweepResult> {
    check_sweep(j, max_range)?;
    let (m, n) = (j.rows(), j.cols());
    let cells = m * n;
    let total = max_range.pow(cells as u32);
    let mut best: Option<(GammaCoupling, BoundVerdict)> = None;
    let mut max_ratio = 0.0f64;
    let mut labels = vec![0usize; cells];
    for code in 0..total {
        let mut c = code;
        for x in labels.iter_mut() {
            *x = c % max_range;
            c /= max_range;
        }
        let g = GammaCoupling::deterministic(m, n, max_range, |a, b| labels[a * n + b])?;
        let verdict = check_theorem1(j, &g, k)?;
        max_ratio = max_ratio.max(entropy_ratio(j, &g)?);
        if best.as_ref().is_none_or(|(_, v)| verdict.slack < v.slack) {
            best = Some((g, verdict));
        }
    }
    let (worst, verdict) = best.expect("at least one map");
    Ok(SweepResult { worst, verdict, max_ratio })
}

/// Two-valued block index of a block matrix, which has positive entropy yet is a
/// function of either coordinate alone.
pub fn block_counterexample(j: &JointDistribution) -> Result<(GammaCoupling, InfoReport)> {
    let Blockness::Block(split) = block_split(j)? else {
        return Err(Error::NotBlock);
    };
    let g = GammaCoupling::deterministic(j.rows(), j.cols(), 2, |a, _| usize::from(!split.rows1.contains(&a)))?;
    let report = gamma_report(j, &g)?;
    Ok((g, report))
}

/// `log2` of the largest entropy ratio over deterministic maps, at least 0. Any
/// derivation of `j` has at least this order.
pub fn order_lower_bound(j: &JointDistribution, max_range: usize) -> Result<f64> {
    let ratio = gamma_sweep(j, 0, max_range)?.max_ratio;
    Ok(ratio.log2().max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateVerdict {
    /// `H(a) + H(b) <= v + w + (2 - 2^-k) u`
    pub order_bound: BoundVerdict,
    /// `H(a) + H(b) <= v + w + 2u`
    pub generic: BoundVerdict,
}

pub fn rate_bound(r: RatePoint, k: u32, h_alpha: f64, h_beta: f64) -> Result<RateVerdict> {
    if [r.u, r.v, r.w, h_alpha, h_beta].iter().any(|x| x.is_nan() || *x < 0.0) {
        return Err(Error::NegativeRate);
    }
    let lhs = h_alpha + h_beta;
    let rhs = r.v + r.w + (2.0 - 1.0 / scale(k)) * r.u;
    let rhs_generic = r.v + r.w + 2.0 * r.u;
    assert!(rhs <= rhs_generic);
    Ok(RateVerdict { order_bound: BoundVerdict::new(lhs, rhs), generic: BoundVerdict::new(lhs, rhs_generic) })
}

/// Entropy of `mu` after an erasure-style corruption with error probability `eps`
/// over an alphabet of size `m`.
pub fn lemma12_bound(h_mu: f64, eps: f64, m: usize) -> Result<f64> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if m == 0 {
        return Err(Error::OutOfRange("alphabet size must be at least 1".into()));
    }
    Ok(h_mu + 1.0 + eps * (m as f64).log2())
}

/// Order-`k` bound on the `n`-fold product of the witness base, `k` the witness order.
pub fn common_information_bound(w: &DerivationWitness, n: usize, g: &GammaCoupling) -> Result<BoundVerdict> {
    if n == 0 {
        return Err(Error::BadN);
    }
    let base = w.base();
    let cells = (base.rows() as f64).powi(n as i32) * (base.cols() as f64).powi(n as i32);
    if cells > 4096.0 {
        return Err(Error::TooLarge(format!("{cells} cells in the {n}-fold product")));
    }
    let mut p = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..n {
        p = p.kronecker(base.matrix());
    }
    let power = JointDistribution::settle(p)?;
    let k = u32::try_from(w.order()).map_err(|_| Error::TooLarge("order".into()))?;
    check_theorem1(&power, g, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{d_epsilon, d_epsilon_chain};

    fn hb(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    fn row_gamma(j: &JointDistribution) -> GammaCoupling {
        GammaCoupling::deterministic(j.rows(), j.cols(), j.rows(), |a, _| a).unwrap()
    }

    #[test]
    fn theorem1_examples() {
        let u = JointDistribution::uniform(2, 2);
        let v = check_theorem1(&u, &row_gamma(&u), 0).unwrap();
        assert!(v.holds && v.slack.abs() < 1e-12);

        let d0 = d_epsilon(0.0).unwrap();
        let v = check_theorem1(&d0, &row_gamma(&d0), 7).unwrap();
        assert!(!v.holds);
        assert!((v.lhs - 1.0).abs() < 1e-12 && v.rhs.abs() < 1e-12);

        let d = d_epsilon(3.0 / 16.0).unwrap();
        let v = check_theorem1(&d, &row_gamma(&d), 1).unwrap();
        assert!((v.rhs - 2.0 * hb(0.375)).abs() < 1e-12);
        assert!((v.rhs - 1.908868).abs() < 1e-6);
        assert!(v.holds);
    }

    #[test]
    fn theorem3_examples() {
        let d = d_epsilon(3.0 / 16.0).unwrap();
        let g = row_gamma(&d);
        let t1 = check_theorem1(&d, &g, 1).unwrap();
        let t3 = check_theorem3(&d, &g, 1).unwrap();
        assert!((t1.rhs - t3.rhs).abs() < 1e-12);

        let u = JointDistribution::uniform(2, 2);
        let coin = GammaCoupling::new(2, 2, 2, vec![0.5; 8]).unwrap();
        let v = check_theorem3(&u, &coin, 0).unwrap();
        assert!((v.lhs - 1.0).abs() < 1e-12 && (v.rhs - 1.0).abs() < 1e-12 && v.holds);
        let info = theorem3_information_form(&u, &coin, 0).unwrap();
        assert!((info.slack - v.slack).abs() < 1e-12);
    }

    #[test]
    fn sweep_examples() {
        let d0 = d_epsilon(0.0).unwrap();
        let s = gamma_sweep(&d0, 0, 2).unwrap();
        assert!(s.max_ratio.is_infinite());
        assert!(!s.verdict.holds);

        let u = JointDistribution::uniform(2, 2);
        assert!(gamma_sweep(&u, 0, 4).unwrap().max_ratio <= 1.0 + 1e-9);

        let big = JointDistribution::uniform(4, 4);
        assert!(matches!(gamma_sweep(&big, 0, 4), Err(Error::TooLarge(_))));
    }

    #[test]
    fn counterexample_examples() {
        let (_, r) = block_counterexample(&d_epsilon(0.0).unwrap()).unwrap();
        assert!((r.get("H(g)").unwrap() - 1.0).abs() < 1e-12);
        assert!(r.get("H(g|a)").unwrap() <= 1e-12 && r.get("H(g|b)").unwrap() <= 1e-12);

        let skew = JointDistribution::from_rows(&[vec![0.9, 0.0], vec![0.0, 0.1]]).unwrap();
        let (_, r) = block_counterexample(&skew).unwrap();
        assert!((r.get("H(g)").unwrap() - hb(0.9)).abs() < 1e-12);

        let pos = JointDistribution::from_rows(&[vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
        assert!(matches!(block_counterexample(&pos), Err(Error::NotBlock)));
    }

    #[test]
    fn order_bound_examples() {
        let ind = JointDistribution::product(&[0.3, 0.7], &[0.5, 0.5]).unwrap();
        assert!(order_lower_bound(&ind, 2).unwrap() < 1e-12);
        assert!(order_lower_bound(&d_epsilon(0.0).unwrap(), 2).unwrap().is_infinite());
        let e = 0.1;
        let d = d_epsilon(e).unwrap();
        let bound = order_lower_bound(&d, 2).unwrap();
        assert!(bound >= (1.0 / hb(2.0 * e)).log2() - 1e-12);
    }

    #[test]
    fn rate_examples() {
        let one = RatePoint::new(1.0, 1.0, 1.0).unwrap();
        let r = rate_bound(one, 1, 1.0, 1.0).unwrap();
        assert_eq!(r.order_bound.rhs, 3.5);
        assert!(r.order_bound.holds);
        let r0 = rate_bound(RatePoint::new(0.5, 1.0, 2.0).unwrap(), 0, 0.0, 0.0).unwrap();
        assert_eq!(r0.order_bound.rhs, 3.5);
        assert!(!rate_bound(one, 1, 2.0, 2.0).unwrap().order_bound.holds);
        assert!(matches!(RatePoint::new(-1.0, 1.0, 1.0), Err(Error::NegativeRate)));
    }

    #[test]
    fn lemma12_examples() {
        assert!((lemma12_bound(1.0, 0.1, 4).unwrap() - 2.2).abs() < 1e-15);
        assert_eq!(lemma12_bound(1.0, 0.0, 8).unwrap(), 2.0);
        assert!(matches!(lemma12_bound(1.0, 0.5, 4), Err(Error::EpsOutOfRange(_))));
    }

    #[test]
    fn common_information_examples() {
        let w = d_epsilon_chain(1);
        let g = row_gamma(w.base());
        assert_eq!(common_information_bound(&w, 1, &g).unwrap(), check_theorem1(w.base(), &g, 1).unwrap());
        let first = GammaCoupling::deterministic(4, 4, 2, |a, _| a / 2).unwrap();
        assert!(common_information_bound(&w, 2, &first).unwrap().holds);
        assert!(matches!(common_information_bound(&w, 20, &first), Err(Error::TooLarge(_))));
    }
}
