//! Exact finite-n law of the occupation count `N_n` and of the block sum
//! `J_n(D) = n(-log2 pi0 - h2(D)) - ell * N_n`.

use crate::chain::{signed_pow, ChainParams, State};
use crate::error::{check_blocklength, Error, Result};
use crate::numeric::CompensatedSum;
use crate::tilt::{h2, jtilt_unchecked, tilted_stats, DistortionLevel};

/// Largest blocklength accepted by the O(n^2) dynamic program.
pub const PMF_MAX_N: usize = 32_768;

/// Exact distribution of `N_n` over `{0, ..., n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationPmf {
    n: usize,
    probs: Vec<f64>,
}

impl OccupationPmf {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }

    /// `E[(N - E N)^k]` for `k = 0..=order`.
    pub fn central_moments(&self, order: usize) -> Vec<f64> {
        let mean = self.mean();
        let mut moments = vec![0.0; order + 1];
        for (m, &p) in self.probs.iter().enumerate() {
            let dev = m as f64 - mean;
            let mut pow = p;
            for slot in moments.iter_mut() {
                *slot += pow;
                pow *= dev;
            }
        }
        moments
    }

    pub fn variance(&self) -> f64 {
        self.central_moments(2)[2]
    }

    /// `sum_m probs[m] * u^m`, straight from the table.
    pub fn pgf(&self, u: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * u + p)
    }

    /// `Pr(N_n <= m)` for each `m`.
    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// Total-variation distance to another table of the same length.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        assert_eq!(self.probs.len(), other.len(), "support mismatch");
        0.5 * self
            .probs
            .iter()
            .zip(other)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Forward recursion over (state, count), starting from `pi`.
pub fn occupation_pmf(chain: &ChainParams, n: usize) -> Result<OccupationPmf> {
    occupation_pmf_capped(chain, n, PMF_MAX_N)
}

pub fn occupation_pmf_capped(chain: &ChainParams, n: usize, cap: usize) -> Result<OccupationPmf> {
    check_blocklength(n)?;
    if n > cap {
        return Err(Error::Resource {
            what: "occupation PMF blocklength",
            requested: n as u128,
            limit: cap as u128,
        });
    }
    let [[p00, p01], [p10, p11]] = chain.matrix();
    // alpha0[m], alpha1[m]: probability of ending the prefix in state 0/1
    // having visited state 1 exactly m times.
    let mut alpha0 = vec![0.0; n + 1];
    let mut alpha1 = vec![0.0; n + 1];
    alpha0[0] = chain.pi0();
    alpha1[1] = chain.pi1();
    for t in 1..n {
        // descending so that index m - 1 still holds the previous step
        for m in (0..=t + 1).rev() {
            let stay0 = alpha0[m] * p00 + alpha1[m] * p10;
            let enter1 = if m > 0 {
                alpha0[m - 1] * p01 + alpha1[m - 1] * p11
            } else {
                0.0
            };
            alpha0[m] = stay0;
            alpha1[m] = enter1;
        }
    }
    let probs = alpha0.iter().zip(&alpha1).map(|(x, y)| x + y).collect();
    Ok(OccupationPmf { n, probs })
}

/// `G_n(u)` held as its base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfValue {
    pub log2: f64,
}

impl PgfValue {
    /// The value itself; may overflow to infinity or underflow to zero.
    pub fn value(self) -> f64 {
        self.log2.exp2()
    }
}

/// `pi^T D(u) (P D(u))^(n-1) 1` with `D(u) = diag(1, u)`.
pub fn occupation_pgf(chain: &ChainParams, n: usize, u: f64) -> Result<PgfValue> {
    check_blocklength(n)?;
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Domain {
            name: "u",
            value: u,
            range: "(0, inf)".into(),
        });
    }
    Ok(PgfValue {
        log2: log2_pgf(chain, n, u.log2()),
    })
}

/// `log2 G_n(2^log2_u)`. The product is renormalised after every step; for
/// `u > 1` the state labels are exchanged so that the weight stays <= 1,
/// using `G_n(u) = u^n G'_n(1/u)` with `G'` the PGF of the zero count.
pub(crate) fn log2_pgf(chain: &ChainParams, n: usize, log2_u: f64) -> f64 {
    if log2_u > 0.0 {
        return n as f64 * log2_u + log2_pgf(&chain.relabeled(), n, -log2_u);
    }
    let u = log2_u.exp2();
    let [[p00, p01], [p10, p11]] = chain.matrix();
    let mut v0 = chain.pi0();
    let mut v1 = chain.pi1() * u;
    let mut log_scale = 0.0;
    for _ in 1..n {
        let w0 = v0 * p00 + v1 * p10;
        let w1 = (v0 * p01 + v1 * p11) * u;
        let s = w0 + w1;
        log_scale += s.log2();
        v0 = w0 / s;
        v1 = w1 / s;
    }
    log_scale + (v0 + v1).log2()
}

/// Law of `J_n(D)` as the affine image `offset + slope * m` of `N_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JnLaw {
    n: usize,
    offset: f64,
    slope: f64,
    support: Vec<f64>,
    pmf: OccupationPmf,
}

impl JnLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `n(-log2 pi0 - h2(D))`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `-ell`; zero for the symmetric chain, in which case the law is a
    /// point mass.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        self.pmf.probs()
    }

    pub fn occupation(&self) -> &OccupationPmf {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(self.probs())
            .map(|(j, p)| j * p)
            .sum()
    }

    /// Atoms `(value, probability)` sorted by value.
    pub fn atoms_sorted(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = self
            .support
            .iter()
            .copied()
            .zip(self.probs().iter().copied())
            .collect();
        if self.slope < 0.0 {
            atoms.reverse();
        }
        atoms
    }
}

pub fn jn_law(chain: &ChainParams, d: DistortionLevel, n: usize) -> Result<JnLaw> {
    d.check(chain)?;
    let pmf = occupation_pmf(chain, n)?;
    let offset = n as f64 * jtilt_unchecked(chain, d, State::Zero);
    let slope = -chain.ell();
    let support = (0..=n).map(|m| offset + slope * m as f64).collect();
    Ok(JnLaw {
        n,
        offset,
        slope,
        support,
        pmf,
    })
}

/// `Pr(J_n - n mu_D >= threshold) = Pr(-ell (N_n - n pi1) >= threshold)`.
///
/// Lattice points within a relative 1e-12 of the threshold count as hits.
pub fn centered_upper_tail(chain: &ChainParams, pmf: &OccupationPmf, threshold: f64) -> f64 {
    let n = pmf.n() as f64;
    let slack = 1e-12 * threshold.abs().max(1.0);
    pmf.probs()
        .iter()
        .enumerate()
        .filter(|(m, _)| -chain.ell() * (*m as f64 - n * chain.pi1()) >= threshold - slack)
        .map(|(_, p)| *p)
        .sum()
}

/// `Lambda_n(theta)` as a direct expectation over the exact occupation law,
/// `(1/n) log2 sum_m Pr(N_n = m) 2^(-theta ell (m - n pi1))`. Independent of
/// the transfer-matrix route in [`crate::cgf::cgf_finite`].
pub fn cgf_from_pmf(chain: &ChainParams, pmf: &OccupationPmf, theta: f64) -> f64 {
    let n = pmf.n() as f64;
    let exponents: Vec<f64> = pmf
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(m, &p)| p.log2() - theta * chain.ell() * (m as f64 - n * chain.pi1()))
        .collect();
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - top).exp2()).sum();
    (top + sum.log2()) / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMethod {
    /// `ell^2 pi0 pi1 [n + 2 sum_{k<n} (n - k) lambda2^k]`
    DoubleSum,
    /// `ell^2 pi0 pi1 [n(1+r)/(1-r) - 2r(1-r^n)/(1-r)^2]`
    ClosedForm,
}

/// `Var(J_n(D))` in bits^2; the same for every admissible D.
pub fn variance_exact(chain: &ChainParams, n: usize, method: VarianceMethod) -> Result<f64> {
    check_blocklength(n)?;
    let scale = chain.ell() * chain.ell() * chain.pi0() * chain.pi1();
    let bracket = match method {
        VarianceMethod::DoubleSum => occupation_bracket_sum(chain.lambda2(), n),
        VarianceMethod::ClosedForm => occupation_bracket_closed(chain.lambda2(), n),
    };
    Ok(scale * bracket)
}

fn occupation_bracket_sum(r: f64, n: usize) -> f64 {
    // for r < 0 the terms alternate in sign
    let mut sum = CompensatedSum::default();
    let mut pow = 1.0;
    for k in 1..n {
        pow *= r;
        sum.add(2.0 * (n - k) as f64 * pow);
    }
    n as f64 + sum.value()
}

fn occupation_bracket_closed(r: f64, n: usize) -> f64 {
    let n_f = n as f64;
    n_f * (1.0 + r) / (1.0 - r) - 2.0 * r * one_minus_pow(r, n) / ((1.0 - r) * (1.0 - r))
}

/// `1 - r^n` without cancellation for `r` close to 1.
fn one_minus_pow(r: f64, n: usize) -> f64 {
    if r > 0.0 {
        -(n as f64 * r.ln()).exp_m1()
    } else {
        1.0 - signed_pow(r, n as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCorrection {
    /// `n V_sl - Var(J_n) = C (1 - lambda2^n)`.
    pub correction: f64,
    /// `C = 2 ell^2 pi0 pi1 lambda2 / (1 - lambda2)^2`.
    pub constant: f64,
}

pub fn variance_correction(chain: &ChainParams, n: usize) -> Result<VarianceCorrection> {
    check_blocklength(n)?;
    let r = chain.lambda2();
    let constant =
        2.0 * chain.ell() * chain.ell() * chain.pi0() * chain.pi1() * r / ((1.0 - r) * (1.0 - r));
    Ok(VarianceCorrection {
        correction: constant * one_minus_pow(r, n),
        constant,
    })
}

/// Cumulants `kappa_2 ..= kappa_max_order` of `J_n(D) - n mu_D`.
///
/// Computed from the central moments of the exact occupation law and the
/// scaling `kappa_m(cY + d) = c^m kappa_m(Y)` with `c = -ell`. The
/// distortion only enters through the regime check.
pub fn centered_cumulants(
    chain: &ChainParams,
    d: DistortionLevel,
    n: usize,
    max_order: usize,
) -> Result<Vec<f64>> {
    if !(2..=6).contains(&max_order) {
        return Err(Error::Order(max_order));
    }
    d.check(chain)?;
    let pmf = occupation_pmf(chain, n)?;
    let kappa = cumulants_from_central_moments(&pmf.central_moments(max_order));
    let c = -chain.ell();
    Ok((2..=max_order)
        .map(|m| c.powi(m as i32) * kappa[m])
        .collect())
}

/// `kappa_m = mu_m - sum_{k=2}^{m-2} C(m-1, k-1) kappa_k mu_{m-k}` for a
/// centred variable (`kappa_1 = mu_1 = 0`).
pub(crate) fn cumulants_from_central_moments(mu: &[f64]) -> Vec<f64> {
    let order = mu.len() - 1;
    let mut kappa = vec![0.0; order + 1];
    for m in 2..=order {
        let mut k_m = mu[m];
        for k in 2..m - 1 {
            k_m -= binomial(m - 1, k - 1) * kappa[k] * mu[m - k];
        }
        kappa[m] = k_m;
    }
    kappa
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `h2(D') - h2(D)`: per-letter amount by which the `J_n` support at `D`
/// lies above the support at `D'`.
pub fn distortion_shift(d: DistortionLevel, d_prime: DistortionLevel) -> f64 {
    h2(d_prime.value()) - h2(d.value())
}

/// `n mu_D`.
pub fn block_mean(chain: &ChainParams, d: DistortionLevel, n: usize) -> Result<f64> {
    Ok(n as f64 * tilted_stats(chain, d)?.mu_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::derive_chain;

    fn lvl(d: f64) -> DistortionLevel {
        DistortionLevel::new(d).unwrap()
    }

    #[test]
    fn small_pmfs_match_hand_enumeration() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let p1 = occupation_pmf(&c, 1).unwrap();
        assert!((p1.probs()[0] - 0.75).abs() < 1e-15 && p1.probs()[1] == 0.25);
        let p2 = occupation_pmf(&c, 2).unwrap();
        let expect = [0.75 * 0.9, 0.75 * 0.1 + 0.25 * 0.3, 0.25 * 0.7];
        for (p, e) in p2.probs().iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((expect[0] - 0.675).abs() < 1e-15 && (expect[1] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn pmf_is_normalised_and_stationary() {
        let c = derive_chain(0.2, 0.7).unwrap();
        for n in [1, 3, 17, 250] {
            let p = occupation_pmf(&c, n).unwrap();
            assert!((p.total() - 1.0).abs() < 1e-12);
            assert!((p.mean() - n as f64 * c.pi1()).abs() < 1e-9);
            assert!(p.probs().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn pmf_cap_and_empty_block() {
        let c = derive_chain(0.2, 0.7).unwrap();
        assert!(matches!(occupation_pmf(&c, 0), Err(Error::EmptyBlock)));
        assert!(matches!(
            occupation_pmf_capped(&c, 11, 10),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(
            occupation_pmf(&c, PMF_MAX_N + 1),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn pgf_values() {
        let c = derive_chain(0.1, 0.3).unwrap();
        for n in [1, 2, 9, 400] {
            assert!(occupation_pgf(&c, n, 1.0).unwrap().log2.abs() < 1e-13);
        }
        let g = occupation_pgf(&c, 2, 2.0).unwrap().value();
        assert!((g - 1.675).abs() < 1e-13);
        let n = 10;
        let g = occupation_pgf(&c, n, 1e-8).unwrap().value();
        let p0 = 0.75 * 0.9f64.powi(n as i32 - 1);
        assert!(((g - p0) / p0).abs() < 1e-6);
        assert!(occupation_pgf(&c, 3, 0.0).is_err());
        assert!(occupation_pgf(&c, 3, -1.0).is_err());
    }

    #[test]
    fn pgf_survives_extreme_arguments() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let big = log2_pgf(&c, 5000, 400.0);
        assert!(big.is_finite());
        // G_n(u) ~ Pr(all ones) u^n for huge u
        let all_ones = c.pi1().log2() + 4999.0 * 0.7f64.log2();
        assert!((big - (5000.0 * 400.0 + all_ones)).abs() < 1e-6);
        let tiny = log2_pgf(&c, 5000, -400.0);
        let all_zeros = c.pi0().log2() + 4999.0 * 0.9f64.log2();
        assert!((tiny - all_zeros).abs() < 1e-6);
    }

    #[test]
    fn variance_table_values() {
        let c = derive_chain(0.1, 0.3).unwrap();
        for (n, per_letter) in [(1, 0.471), (2, 0.754), (5, 1.232), (10, 1.533), (50, 1.813)] {
            let v = variance_exact(&c, n, VarianceMethod::ClosedForm).unwrap();
            assert!(
                (v / n as f64 - per_letter).abs() < 5e-4,
                "n={n}: {}",
                v / n as f64
            );
        }
        let v10 = variance_exact(&c, 10, VarianceMethod::DoubleSum).unwrap();
        assert!((v10 - 15.33).abs() < 5e-3);
    }

    #[test]
    fn symmetric_chain_has_no_variance() {
        let c = derive_chain(0.35, 0.35).unwrap();
        for method in [VarianceMethod::DoubleSum, VarianceMethod::ClosedForm] {
            assert_eq!(variance_exact(&c, 30, method).unwrap(), 0.0);
        }
        let law = jn_law(&c, lvl(0.2), 10).unwrap();
        assert_eq!(law.slope(), 0.0);
        let point = 10.0 * (1.0 - h2(0.2));
        for &j in law.support() {
            assert!((j - point).abs() < 1e-12);
        }
        for k in centered_cumulants(&c, lvl(0.2), 10, 6).unwrap() {
            assert_eq!(k, 0.0);
        }
    }

    #[test]
    fn correction_constant() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let corr = variance_correction(&c, 200).unwrap();
        assert!((corr.constant - 3.53).abs() < 5e-3);
        assert!((corr.correction - corr.constant * (1.0 - 0.6f64.powi(200))).abs() < 1e-6);
        let iid = derive_chain(0.3, 0.7).unwrap();
        for n in [1, 5, 100] {
            assert_eq!(variance_correction(&iid, n).unwrap().correction, 0.0);
        }
    }

    #[test]
    fn jn_law_small_cases() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let law = jn_law(&c, lvl(0.1), 1).unwrap();
        let j0 = crate::tilt::jtilt(&c, lvl(0.1), State::Zero).unwrap();
        let j1 = crate::tilt::jtilt(&c, lvl(0.1), State::One).unwrap();
        assert!((law.support()[0] - j0).abs() < 1e-15);
        assert!((law.support()[1] - j1).abs() < 1e-14);
        assert!((law.probs()[0] - 0.75).abs() < 1e-15 && law.probs()[1] == 0.25);
        let law = jn_law(&c, lvl(0.1), 50).unwrap();
        let target = block_mean(&c, lvl(0.1), 50).unwrap();
        assert!((law.mean() - target).abs() < 1e-9);
        for w in law.support().windows(2) {
            assert!((w[0] - w[1] - c.ell()).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulant_recursion_on_known_law() {
        // Bernoulli(p): kappa_2 = pq, kappa_3 = pq(q - p), kappa_4 = pq(1 - 6pq)
        let p: f64 = 0.3;
        let q = 1.0 - p;
        let mu: Vec<f64> = (0..=4).map(|k| q * (-p).powi(k) + p * q.powi(k)).collect();
        let kappa = cumulants_from_central_moments(&mu);
        assert!((kappa[2] - p * q).abs() < 1e-15);
        assert!((kappa[3] - p * q * (q - p)).abs() < 1e-15);
        assert!((kappa[4] - p * q * (1.0 - 6.0 * p * q)).abs() < 1e-15);
    }

    #[test]
    fn cumulant_order_is_checked() {
        let c = derive_chain(0.1, 0.3).unwrap();
        assert!(matches!(
            centered_cumulants(&c, lvl(0.1), 5, 1),
            Err(Error::Order(1))
        ));
        assert!(matches!(
            centered_cumulants(&c, lvl(0.1), 5, 7),
            Err(Error::Order(7))
        ));
    }

    #[test]
    fn tail_at_threshold_zero_and_extremes() {
        let c = derive_chain(0.1, 0.3).unwrap();
        let pmf = occupation_pmf(&c, 20).unwrap();
        assert!((centered_upper_tail(&c, &pmf, -1e9) - 1.0).abs() < 1e-12);
        assert_eq!(centered_upper_tail(&c, &pmf, 1e9), 0.0);
        // the largest centred value is -ell * (n - n pi1), reached only by all ones
        let top = -c.ell() * (20.0 - 20.0 * c.pi1());
        assert_eq!(centered_upper_tail(&c, &pmf, top), pmf.probs()[20]);
    }
}
