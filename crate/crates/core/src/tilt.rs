//! Single-letter Blahut–Arimoto operating point for binary Hamming
//! distortion and the d-tilted information it induces.
//!
//! At slope `beta = ln((1 - D) / D)` the optimal output marginal is
//! `q_x = (pi_x - D) / (1 - 2D)` and the partition values collapse to
//! `Z(x) = pi_x / (1 - D)`, so that `j(x, D) = -log2 pi_x - h2(D)`.
//! Both the generic definition and the collapsed form are exposed; the
//! tests hold them against each other.

use std::f64::consts::LN_2;

use crate::chain::{ChainParams, State};
use crate::error::{Error, Result};

/// Hamming distortion level `D`, validated to lie in `(0, 1/2)`.
///
/// The interior regime `D < min(pi0, pi1)` depends on the chain and is
/// checked by each operation that pairs a level with a chain.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DistortionLevel(f64);

impl DistortionLevel {
    pub fn new(d: f64) -> Result<Self> {
        if d.is_finite() && d > 0.0 && d < 0.5 {
            Ok(DistortionLevel(d))
        } else {
            Err(Error::Regime {
                distortion: d,
                limit: 0.5,
            })
        }
    }

    /// Validates `0 < d < min(pi0, pi1)` for `chain`.
    pub fn interior(chain: &ChainParams, d: f64) -> Result<Self> {
        let level = DistortionLevel::new(d)?;
        level.check(chain)?;
        Ok(level)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub(crate) fn check(self, chain: &ChainParams) -> Result<()> {
        let limit = chain.pi0().min(chain.pi1());
        if self.0 < limit {
            Ok(())
        } else {
            Err(Error::Regime {
                distortion: self.0,
                limit,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BAOperatingPoint {
    /// Slope in nats.
    pub beta: f64,
    pub q0: f64,
    pub q1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl BAOperatingPoint {
    pub fn q(&self, x: State) -> f64 {
        match x {
            State::Zero => self.q0,
            State::One => self.q1,
        }
    }

    pub fn z(&self, x: State) -> f64 {
        match x {
            State::Zero => self.z0,
            State::One => self.z1,
        }
    }

    /// Generic single-letter d-tilted information at this operating point,
    /// `-log2 sum_xhat q(xhat) exp(-beta (d(x, xhat) - D))`.
    pub fn tilted_information(&self, d: DistortionLevel, x: State) -> f64 {
        let sum: f64 = State::ALL
            .iter()
            .map(|&xhat| self.q(xhat) * (-self.beta * (hamming(x, xhat) - d.value())).exp())
            .sum();
        -sum.log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedStats {
    /// `E_pi[j(X, D)] = h2(pi1) - h2(D)`, bits per letter.
    pub mu_d: f64,
    /// Entropy rate `pi0 h2(a) + pi1 h2(b)` of the chain.
    pub h_rate: f64,
    /// `mu_D - R(D) = h2(pi1) - h_rate`; the same for every D.
    pub gap: f64,
    /// Single-letter variance `ell^2 pi0 pi1`.
    pub v_iid: f64,
    /// Asymptotic per-letter variance of the block sum.
    pub v_sl: f64,
}

impl TiltedStats {
    pub fn amplification(&self) -> f64 {
        self.v_sl / self.v_iid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaSettings {
    fn default() -> Self {
        BaSettings {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaSolution {
    pub point: BAOperatingPoint,
    pub iterations: usize,
}

#[inline]
fn hamming(x: State, xhat: State) -> f64 {
    if x == xhat {
        0.0
    } else {
        1.0
    }
}

/// `h2(p)` in bits with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            range: "[0, 1]".into(),
        });
    }
    Ok(h2(p))
}

pub(crate) fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    // (1 - p) ln(1 - p) through ln_1p keeps accuracy for small p
    -(p * p.ln() + (1.0 - p) * (-p).ln_1p()) / LN_2
}

pub fn ba_slope(d: DistortionLevel) -> f64 {
    let d = d.value();
    ((1.0 - d) / d).ln()
}

pub fn ba_operating_point(chain: &ChainParams, d: DistortionLevel) -> Result<BAOperatingPoint> {
    d.check(chain)?;
    let dv = d.value();
    let denom = 1.0 - 2.0 * dv;
    Ok(BAOperatingPoint {
        beta: ba_slope(d),
        q0: (chain.pi0() - dv) / denom,
        q1: (chain.pi1() - dv) / denom,
        z0: chain.pi0() / (1.0 - dv),
        z1: chain.pi1() / (1.0 - dv),
    })
}

/// Alternating update `q(xhat) <- sum_x pi(x) Q(xhat | x)` at the fixed
/// slope `ln((1 - D) / D)`, started from `q = (1/2, 1/2)`.
pub fn ba_fixed_point_iterate(
    chain: &ChainParams,
    d: DistortionLevel,
    settings: BaSettings,
) -> Result<BaSolution> {
    d.check(chain)?;
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::Domain {
            name: "tol",
            value: settings.tol,
            range: "(0, inf)".into(),
        });
    }
    let beta = ba_slope(d);
    let w = (-beta).exp();
    let pi = [chain.pi0(), chain.pi1()];
    let mut q = [0.5, 0.5];
    for iter in 1..=settings.max_iter {
        let z = [q[0] + q[1] * w, q[1] + q[0] * w];
        let next = [
            pi[0] * q[0] / z[0] + pi[1] * q[0] * w / z[1],
            pi[0] * q[1] * w / z[0] + pi[1] * q[1] / z[1],
        ];
        let change = (next[0] - q[0]).abs().max((next[1] - q[1]).abs());
        q = next;
        if change < settings.tol {
            let point = BAOperatingPoint {
                beta,
                q0: q[0],
                q1: q[1],
                z0: q[0] + q[1] * w,
                z1: q[1] + q[0] * w,
            };
            return Ok(BaSolution {
                point,
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "Blahut-Arimoto iteration",
        iterations: settings.max_iter,
    })
}

/// `j(x, D) = -log2 pi_x - h2(D)` in bits.
pub fn jtilt(chain: &ChainParams, d: DistortionLevel, x: State) -> Result<f64> {
    d.check(chain)?;
    Ok(jtilt_unchecked(chain, d, x))
}

#[inline]
pub(crate) fn jtilt_unchecked(chain: &ChainParams, d: DistortionLevel, x: State) -> f64 {
    -chain.pi(x).log2() - h2(d.value())
}

/// The d-tilted information through the generic definition evaluated at the
/// closed-form operating point. Independent of [`jtilt`].
pub fn jtilt_generic(chain: &ChainParams, d: DistortionLevel, x: State) -> Result<f64> {
    let point = ba_operating_point(chain, d)?;
    Ok(point.tilted_information(d, x))
}

pub fn tilted_stats(chain: &ChainParams, d: DistortionLevel) -> Result<TiltedStats> {
    d.check(chain)?;
    let h_pi = h2(chain.pi1());
    let h_rate = chain.pi0() * h2(chain.a()) + chain.pi1() * h2(chain.b());
    let v_iid = chain.ell() * chain.ell() * chain.pi0() * chain.pi1();
    Ok(TiltedStats {
        mu_d: h_pi - h2(d.value()),
        h_rate,
        gap: h_pi - h_rate,
        v_iid,
        v_sl: v_iid * chain.amplification(),
    })
}

/// `V_sl = ab(2 - a - b) / (a + b)^3 * log2^2(a / b)`.
pub fn asymptotic_variance(chain: &ChainParams) -> f64 {
    let (a, b) = (chain.a(), chain.b());
    a * b * (2.0 - a - b) / (a + b).powi(3) * chain.ell() * chain.ell()
}
