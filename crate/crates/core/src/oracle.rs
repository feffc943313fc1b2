//! Brute-force ground truth: every one of the `2^n` paths of length `n` is
//! visited and weighted by `pi_{x_1} prod_t P_{x_t x_{t+1}}`.
//!
//! Nothing here goes through the dynamic program, the transfer matrix, or
//! the collapsed form `-log2 pi_x - h2(D)`.

use crate::chain::{ChainParams, State};
use crate::error::{check_blocklength, Error, Result};
use crate::numeric::CompensatedSum;
use crate::tilt::{ba_operating_point, DistortionLevel};

pub const ORACLE_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub n: usize,
    /// `Pr(N_n = m)` accumulated path by path.
    pub pmf: Vec<f64>,
    /// Number of path terms summed; always `2^n`.
    pub paths: u64,
    /// Mean of `N_n`.
    pub mean: f64,
    /// Variance of `N_n`.
    pub var: f64,
    /// `(u, sum_paths prob * u^count)` for each requested `u`.
    pub mgf_samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleVariance {
    /// `Var(J_n)` from the enumerated occupation law mapped through
    /// `J = n j(0, D) - ell N`.
    pub affine: f64,
    /// `Var(J_n)` with `J` summed letter by letter from the generic
    /// definition at the Blahut–Arimoto operating point.
    pub pathwise: f64,
}

impl OracleVariance {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.affine.abs().max(self.pathwise.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.affine - self.pathwise).abs() / scale
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    check_blocklength(n)?;
    if n > ORACLE_MAX_N {
        return Err(Error::Resource {
            what: "oracle blocklength",
            requested: n as u128,
            limit: ORACLE_MAX_N as u128,
        });
    }
    Ok(())
}

#[inline]
fn state_at(path: u32, t: usize) -> State {
    if path >> t & 1 == 1 {
        State::One
    } else {
        State::Zero
    }
}

fn path_probability(chain: &ChainParams, path: u32, n: usize) -> f64 {
    let mut x = state_at(path, 0);
    let mut prob = chain.pi(x);
    for t in 1..n {
        let y = state_at(path, t);
        prob *= chain.transition(x, y);
        x = y;
    }
    prob
}

/// Visits every path and calls `f(path, probability)`.
fn for_each_path(chain: &ChainParams, n: usize, mut f: impl FnMut(u32, f64)) {
    for path in 0..(1u32 << n) {
        f(path, path_probability(chain, path, n));
    }
}

pub fn enumerate_pmf(chain: &ChainParams, n: usize, us: &[f64]) -> Result<OracleResult> {
    check_size(n)?;
    let mut buckets = vec![CompensatedSum::default(); n + 1];
    let mut mgf = vec![CompensatedSum::default(); us.len()];
    let mut paths = 0u64;
    for_each_path(chain, n, |path, prob| {
        let count = path.count_ones() as usize;
        buckets[count].add(prob);
        for (acc, &u) in mgf.iter_mut().zip(us) {
            acc.add(prob * u.powi(count as i32));
        }
        paths += 1;
    });
    let pmf: Vec<f64> = buckets.iter().map(CompensatedSum::value).collect();
    let mean: f64 = pmf.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
    let var = pmf
        .iter()
        .enumerate()
        .map(|(m, p)| (m as f64 - mean).powi(2) * p)
        .sum();
    Ok(OracleResult {
        n,
        pmf,
        paths,
        mean,
        var,
        mgf_samples: us
            .iter()
            .copied()
            .zip(mgf.iter().map(CompensatedSum::value))
            .collect(),
    })
}

pub fn oracle_variance(
    chain: &ChainParams,
    d: DistortionLevel,
    n: usize,
) -> Result<OracleVariance> {
    check_size(n)?;
    let point = ba_operating_point(chain, d)?;
    let j = [
        point.tilted_information(d, State::Zero),
        point.tilted_information(d, State::One),
    ];

    let enumerated = enumerate_pmf(chain, n, &[])?;
    let slope = j[1] - j[0];
    let values: Vec<f64> = (0..=n)
        .map(|m| n as f64 * j[0] + slope * m as f64)
        .collect();
    let mean: f64 = values.iter().zip(&enumerated.pmf).map(|(v, p)| v * p).sum();
    let affine = values
        .iter()
        .zip(&enumerated.pmf)
        .map(|(v, p)| (v - mean).powi(2) * p)
        .sum();

    let letter_sum = |path: u32| -> f64 { (0..n).map(|t| j[state_at(path, t).index()]).sum() };
    let mut path_mean = CompensatedSum::default();
    for_each_path(chain, n, |path, prob| {
        path_mean.add(prob * letter_sum(path))
    });
    let path_mean = path_mean.value();
    let mut pathwise = CompensatedSum::default();
    for_each_path(chain, n, |path, prob| {
        pathwise.add(prob * (letter_sum(path) - path_mean).powi(2))
    });
    let pathwise = pathwise.value();

    Ok(OracleVariance { affine, pathwise })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::derive_chain;

    #[test]
    fn two_letter_paths() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let r = enumerate_pmf(&c, 2, &[1.0, 2.0]).unwrap();
        let expect = [0.75 * 0.9, 0.75 * 0.1 + 0.25 * 0.3, 0.25 * 0.7];
        for (p, e) in r.pmf.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(r.paths, 4);
        assert!((r.mgf_samples[1].1 - 1.675).abs() < 1e-14);
    }

    #[test]
    fn one_letter_is_the_marginal() {
        let c = derive_chain(0.37, 0.11).unwrap();
        let r = enumerate_pmf(&c, 1, &[]).unwrap();
        assert_eq!(r.pmf, vec![c.pi0(), c.pi1()]);
    }

    #[test]
    fn total_probability_is_one() {
        let c = derive_chain(0.7, 0.2).unwrap();
        for n in [1, 5, 13, 20] {
            let r = enumerate_pmf(&c, n, &[1.0]).unwrap();
            assert_eq!(r.paths, 1 << n);
            assert!((r.mgf_samples[0].1 - 1.0).abs() < 1e-13);
            assert!((r.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn size_limits() {
        let c = derive_chain(0.7, 0.2).unwrap();
        assert!(matches!(
            enumerate_pmf(&c, 21, &[]),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(enumerate_pmf(&c, 0, &[]), Err(Error::EmptyBlock)));
    }

    #[test]
    fn variance_matches_table() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let d = DistortionLevel::new(0.1).unwrap();
        let v1 = oracle_variance(&c, d, 1).unwrap();
        assert!((v1.pathwise - 0.4710).abs() < 5e-5);
        let v5 = oracle_variance(&c, d, 5).unwrap();
        assert!((v5.pathwise / 5.0 - 1.232).abs() < 5e-4);
        assert!(v5.relative_gap() < 1e-12);
    }

    #[test]
    fn symmetric_chain_has_zero_variance() {
        let c = derive_chain(0.6, 0.6).unwrap();
        let v = oracle_variance(&c, DistortionLevel::new(0.2).unwrap(), 8).unwrap();
        assert_eq!(v.affine, 0.0);
        assert!(v.pathwise.abs() < 1e-25);
    }
}
