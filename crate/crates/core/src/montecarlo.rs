//! Monte Carlo harness: simulated block sums checked against the exact law
//! and against the normal limit.
//!
//! Replication `r` draws its path from ChaCha stream `r` under the caller's
//! seed, so reports do not depend on how rayon schedules the work.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::chain::{sample_trajectory_stream, ChainParams, State};
use crate::error::{check_blocklength, Error, Result};
use crate::exact::{jn_law, occupation_pmf, variance_exact, VarianceMethod};
use crate::tilt::{asymptotic_variance, jtilt_unchecked, tilted_stats, DistortionLevel};

pub const MIN_REPLICATIONS: usize = 100;
/// Default cap on `replications * n`.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;
/// Allowed gap between the letter-by-letter sum and the occupation-count form.
pub const PATHWISE_TOL: f64 = 1e-10;

/// Scale used to standardise `J_n - n mu_D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// `sqrt(n V_sl)`, the normalisation of the central limit theorem.
    #[default]
    Limit,
    /// `sqrt(Var(J_n))` at the given blocklength.
    FiniteN,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub standardization: Standardization,
    pub budget: u128,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            standardization: Standardization::Limit,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub emp_mean: f64,
    /// Unbiased sample variance of `J_n(D)`.
    pub emp_var: f64,
    /// Standard error of `emp_var`, `sqrt((m4 - s^4) / R)`.
    pub emp_var_se: f64,
    /// Kolmogorov distance between the empirical and exact laws of `J_n`.
    pub ks_exact: f64,
    /// Kolmogorov distance of the standardised sample to `N(0, 1)`; `None`
    /// for the symmetric chain, whose law is a point mass.
    pub ks_normal: Option<f64>,
    /// Largest per-replication gap between the two evaluations of `J_n`.
    pub max_identity_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltPoint {
    pub n: usize,
    /// Sampled distance, carries Monte Carlo noise.
    pub ks_normal: f64,
    /// Distance of the exact law to the normal CDF.
    pub ks_exact_normal: f64,
}

pub fn simulate(
    chain: &ChainParams,
    d: DistortionLevel,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<SimReport> {
    simulate_with(chain, d, n, replications, seed, SimOptions::default())
}

pub fn simulate_with(
    chain: &ChainParams,
    d: DistortionLevel,
    n: usize,
    replications: usize,
    seed: u64,
    options: SimOptions,
) -> Result<SimReport> {
    d.check(chain)?;
    check_blocklength(n)?;
    if replications < MIN_REPLICATIONS {
        return Err(Error::Domain {
            name: "replications",
            value: replications as f64,
            range: format!("[{MIN_REPLICATIONS}, inf)"),
        });
    }
    let work = replications as u128 * n as u128;
    if work > options.budget {
        return Err(Error::Resource {
            what: "simulation letters",
            requested: work,
            limit: options.budget,
        });
    }
    let pmf = occupation_pmf(chain, n)?;

    let j_letter = [
        jtilt_unchecked(chain, d, State::Zero),
        jtilt_unchecked(chain, d, State::One),
    ];
    let offset = n as f64 * j_letter[0];
    let slope = -chain.ell();

    let draws: Vec<(f64, usize, f64)> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_trajectory_stream(chain, n, seed, r)?;
            let letters: f64 = path.states().iter().map(|x| j_letter[x.index()]).sum();
            let count = path.ones();
            let reduced = offset + slope * count as f64;
            Ok((letters, count, (letters - reduced).abs()))
        })
        .collect::<Result<_>>()?;

    let max_identity_gap = draws.iter().map(|d| d.2).fold(0.0, f64::max);
    let scale = draws.iter().map(|d| d.0.abs()).fold(1.0, f64::max);
    if max_identity_gap > PATHWISE_TOL * scale {
        return Err(Error::Invariant(format!(
            "letter sum and occupation form differ by {max_identity_gap:e}"
        )));
    }

    let samples: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let (emp_mean, emp_var, m4) = shifted_moments(&samples);
    let r = replications as f64;
    let emp_var_se = ((m4 - emp_var * emp_var).max(0.0) / r).sqrt();

    let mut counts = vec![0usize; n + 1];
    for d in &draws {
        counts[d.1] += 1;
    }

    let ks_exact = if chain.is_symmetric() {
        0.0
    } else {
        // the CDFs of J_n and N_n differ by a monotone relabelling, which
        // leaves the Kolmogorov distance unchanged
        let mut emp = 0.0;
        let mut exact = 0.0;
        let mut sup: f64 = 0.0;
        for (c, p) in counts.iter().zip(pmf.probs()) {
            emp += *c as f64 / r;
            exact += p;
            sup = sup.max((emp - exact).abs());
        }
        sup.min(1.0)
    };

    let ks_normal = if chain.is_symmetric() {
        None
    } else {
        let sd = standard_deviation(chain, n, options.standardization)?;
        let atoms: Vec<(f64, f64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(m, &c)| {
                let centered = slope * (m as f64 - n as f64 * chain.pi1());
                (centered / sd, c as f64 / r)
            })
            .collect();
        Some(normal_distance(atoms))
    };

    Ok(SimReport {
        n,
        replications,
        seed,
        emp_mean,
        emp_var,
        emp_var_se,
        ks_exact,
        ks_normal,
        max_identity_gap,
    })
}

/// Mean, unbiased variance, and fourth central moment, accumulated on data
/// shifted by the first sample so that constant data has exactly zero
/// variance.
fn shifted_moments(xs: &[f64]) -> (f64, f64, f64) {
    let shift = xs[0];
    let r = xs.len() as f64;
    let mean_dev = xs.iter().map(|x| x - shift).sum::<f64>() / r;
    let (s2, s4) = xs.iter().fold((0.0, 0.0), |(s2, s4), x| {
        let d = (x - shift) - mean_dev;
        (s2 + d * d, s4 + d * d * d * d)
    });
    (shift + mean_dev, s2 / (r - 1.0), s4 / r)
}

fn standard_deviation(chain: &ChainParams, n: usize, how: Standardization) -> Result<f64> {
    Ok(match how {
        Standardization::Limit => (n as f64 * asymptotic_variance(chain)).sqrt(),
        Standardization::FiniteN => variance_exact(chain, n, VarianceMethod::ClosedForm)?.sqrt(),
    })
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between a discrete law given by `(point, mass)` atoms
/// and the standard normal CDF. Checks both sides of every jump.
pub fn normal_distance(mut atoms: Vec<(f64, f64)>) -> f64 {
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut below = 0.0;
    let mut sup: f64 = 0.0;
    for (z, p) in atoms {
        let phi = normal_cdf(z);
        let above = below + p;
        sup = sup.max((below - phi).abs()).max((above - phi).abs());
        below = above;
    }
    sup.min(1.0)
}

/// Kolmogorov distance between the exact standardised law of
/// `J_n(D) - n mu_D` and the standard normal.
pub fn exact_normal_distance(
    chain: &ChainParams,
    d: DistortionLevel,
    n: usize,
    how: Standardization,
) -> Result<f64> {
    if chain.is_symmetric() {
        return Err(Error::Degenerate("normal limit"));
    }
    let law = jn_law(chain, d, n)?;
    let center = n as f64 * tilted_stats(chain, d)?.mu_d;
    let sd = standard_deviation(chain, n, how)?;
    let atoms = law
        .support()
        .iter()
        .zip(law.probs())
        .map(|(j, p)| ((j - center) / sd, *p))
        .collect();
    Ok(normal_distance(atoms))
}

/// Sampled and exact distances to the normal limit along an increasing grid
/// of blocklengths.
pub fn clt_distance_sweep(
    chain: &ChainParams,
    d: DistortionLevel,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<CltPoint>> {
    if chain.is_symmetric() {
        return Err(Error::Degenerate("normal limit"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain {
            name: "n_grid",
            value: f64::NAN,
            range: "a strictly increasing list".into(),
        });
    }
    n_grid
        .iter()
        .map(|&n| {
            let report = simulate(chain, d, n, replications, seed)?;
            Ok(CltPoint {
                n,
                ks_normal: report.ks_normal.unwrap_or(0.0),
                ks_exact_normal: exact_normal_distance(chain, d, n, Standardization::Limit)?,
            })
        })
        .collect()
}
