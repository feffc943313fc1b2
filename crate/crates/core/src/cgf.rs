//! Cumulant generating functions of the centred block sum, the Perron root
//! of the tilted transfer matrix, the Legendre–Fenchel rate function, and a
//! first-order saddlepoint tail estimate.
//!
//! Everything user-facing is base 2: with `u_theta = 2^(-theta ell)`,
//!
//! ```text
//! Lambda_n(theta) = theta pi1 ell + (1/n) log2 G_n(u_theta)
//! Lambda(theta)   = theta pi1 ell + log2 lambda_+(u_theta)
//! I(x)            = sup_theta { theta x - Lambda(theta) }
//! ```
//!
//! Taking the supremum over `theta` instead of `u` is a monotone change of
//! variables (`u = 2^(-theta ell)`), so both describe the same transform.
//! The distortion never appears: centring removes it.

use std::f64::consts::{LN_2, PI};

use crate::chain::ChainParams;
use crate::error::{check_blocklength, Error, Result};
use crate::exact::log2_pgf;

/// Tolerance on `|Lambda'(theta*) - x|` used by [`rate_function`] callers
/// that have no preference.
pub const RATE_TOL: f64 = 1e-10;
const RATE_MAX_ITER: usize = 200;
/// Tilts with `|theta*|` below this are flagged as close to the Gaussian
/// regime in [`saddlepoint_tail`].
pub const NEAR_GAUSSIAN_THETA: f64 = 0.05;

/// Largest eigenvalue of `P diag(1, u)`.
pub fn perron_root(chain: &ChainParams, u: f64) -> f64 {
    debug_assert!(u > 0.0);
    if u > 1.0 {
        u * perron_direct(&chain.relabeled(), 1.0 / u)
    } else {
        perron_direct(chain, u)
    }
}

/// `log2 lambda_+(2^log2_u)`, finite for every finite argument.
pub fn perron_log2(chain: &ChainParams, log2_u: f64) -> f64 {
    if log2_u > 0.0 {
        log2_u + perron_direct(&chain.relabeled(), (-log2_u).exp2()).log2()
    } else {
        perron_direct(chain, log2_u.exp2()).log2()
    }
}

/// Both roots of the characteristic polynomial
/// `lambda^2 - ((1-a) + (1-b)u) lambda + u(1-a-b)`.
pub fn transfer_eigenvalues(chain: &ChainParams, u: f64) -> (f64, f64) {
    let plus = perron_root(chain, u);
    // Vieta avoids the cancellation in the "-" branch of the formula.
    (plus, u * chain.lambda2() / plus)
}

fn perron_direct(chain: &ChainParams, u: f64) -> f64 {
    let (p, q) = (1.0 - chain.a(), (1.0 - chain.b()) * u);
    // both diagonal entries are non-negative, so the "+" root has no cancellation
    let disc = (p - q) * (p - q) + 4.0 * chain.a() * chain.b() * u;
    0.5 * (p + q + disc.sqrt())
}

/// Elasticity `u lambda'(u) / lambda(u)` and its log-derivative
/// `u d/du [u lambda' / lambda]`, both for `u <= 1`.
fn elasticities(chain: &ChainParams, u: f64) -> (f64, f64) {
    let (p, beta) = (1.0 - chain.a(), 1.0 - chain.b());
    let q = beta * u;
    let root = ((p - q) * (p - q) + 4.0 * chain.a() * chain.b() * u).sqrt();
    let lam = 0.5 * (p + q + root);
    let d1 = (beta * lam - chain.lambda2()) / root;
    let d2 = (2.0 * beta * d1 - 2.0 * d1 * d1) / root;
    let h = u * d1 / lam;
    let k = h + u * u * d2 / lam - h * h;
    (h, k)
}

fn elasticities_log2(chain: &ChainParams, log2_u: f64) -> (f64, f64) {
    if log2_u > 0.0 {
        let (h, k) = elasticities(&chain.relabeled(), (-log2_u).exp2());
        (1.0 - h, k)
    } else {
        elasticities(chain, log2_u.exp2())
    }
}

/// `Lambda_n(theta)` through the rescaled transfer-matrix product.
pub fn cgf_finite(chain: &ChainParams, n: usize, theta: f64) -> Result<f64> {
    check_blocklength(n)?;
    if chain.is_symmetric() {
        return Ok(0.0);
    }
    let ell = chain.ell();
    Ok(theta * chain.pi1() * ell + log2_pgf(chain, n, -theta * ell) / n as f64)
}

/// `Lambda(theta) = theta pi1 ell + log2 lambda_+(2^(-theta ell))`.
pub fn cgf_limit(chain: &ChainParams, theta: f64) -> f64 {
    if chain.is_symmetric() {
        return 0.0;
    }
    let ell = chain.ell();
    theta * chain.pi1() * ell + perron_log2(chain, -theta * ell)
}

/// `Lambda'(theta)`, from the closed-form derivative of the Perron root.
pub fn cgf_limit_slope(chain: &ChainParams, theta: f64) -> f64 {
    if chain.is_symmetric() {
        return 0.0;
    }
    let ell = chain.ell();
    let (h, _) = elasticities_log2(chain, -theta * ell);
    ell * (chain.pi1() - h)
}

/// `Lambda''(theta)`.
pub fn cgf_limit_curvature(chain: &ChainParams, theta: f64) -> f64 {
    if chain.is_symmetric() {
        return 0.0;
    }
    let ell = chain.ell();
    let (_, k) = elasticities_log2(chain, -theta * ell);
    ell * ell * LN_2 * k
}

/// Sampled finite-n and limiting CGFs on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfCurve {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub lambda_n: Vec<f64>,
    pub lambda_inf: Vec<f64>,
}

impl CgfCurve {
    /// Smallest second difference of each curve; both are non-negative up
    /// to rounding on an evenly spaced grid.
    pub fn min_second_differences(&self) -> (f64, f64) {
        fn min_diff(v: &[f64]) -> f64 {
            v.windows(3)
                .map(|w| w[0] - 2.0 * w[1] + w[2])
                .fold(f64::INFINITY, f64::min)
        }
        (min_diff(&self.lambda_n), min_diff(&self.lambda_inf))
    }
}

pub fn cgf_curve(chain: &ChainParams, n: usize, thetas: &[f64]) -> Result<CgfCurve> {
    let lambda_n = thetas
        .iter()
        .map(|&t| cgf_finite(chain, n, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(CgfCurve {
        n,
        thetas: thetas.to_vec(),
        lambda_n,
        lambda_inf: thetas.iter().map(|&t| cgf_limit(chain, t)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    /// Centred per-letter value in bits.
    pub x: f64,
    pub theta_star: f64,
    /// `I(x)` in bits.
    pub rate: f64,
}

fn theta_big(chain: &ChainParams) -> f64 {
    50.0 / chain.ell().abs()
}

/// Open interval of centred per-letter values reachable by the tilt,
/// `(Lambda'(-theta_big), Lambda'(theta_big))` with `theta_big = 50 / |ell|`.
pub fn achievable_range(chain: &ChainParams) -> Result<(f64, f64)> {
    if chain.is_symmetric() {
        return Err(Error::Degenerate("rate function"));
    }
    let t = theta_big(chain);
    Ok((cgf_limit_slope(chain, -t), cgf_limit_slope(chain, t)))
}

/// Legendre–Fenchel transform of [`cgf_limit`] at `x`.
///
/// Solves `Lambda'(theta) = x` by Newton's method safeguarded by bisection on
/// a bracket grown by doubling from the origin.
pub fn rate_function(chain: &ChainParams, x: f64, tol: f64) -> Result<RatePoint> {
    let (lo_x, hi_x) = achievable_range(chain)?;
    if !(x > lo_x && x < hi_x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            range: format!("({lo_x}, {hi_x})"),
        });
    }
    if x == 0.0 {
        return Ok(RatePoint {
            x,
            theta_star: 0.0,
            rate: 0.0,
        });
    }
    let theta = solve_slope(chain, x, tol)?;
    let rate = (theta * x - cgf_limit(chain, theta)).max(0.0);
    Ok(RatePoint {
        x,
        theta_star: theta,
        rate,
    })
}

fn solve_slope(chain: &ChainParams, x: f64, tol: f64) -> Result<f64> {
    let slope = |t: f64| cgf_limit_slope(chain, t) - x;
    let sign = x.signum();
    let limit = theta_big(chain);
    // grow outward from the origin, where the residual is -x
    let mut inner = 0.0;
    let mut outer = sign;
    while sign * slope(outer) < 0.0 {
        inner = outer;
        outer *= 2.0;
        if outer.abs() >= limit {
            outer = sign * limit;
            break;
        }
    }
    let (mut lo, mut hi) = if sign > 0.0 {
        (inner, outer)
    } else {
        (outer, inner)
    };
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..RATE_MAX_ITER {
        let f = slope(theta);
        if f.abs() <= tol {
            return Ok(theta);
        }
        if f < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let step = theta - f / cgf_limit_curvature(chain, theta);
        theta = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NonConvergence {
        what: "rate function solver",
        iterations: RATE_MAX_ITER,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    /// Estimate of `Pr(J_n - n mu_D >= n x)`.
    pub prob: f64,
    pub point: RatePoint,
    /// `|theta*|` is below [`NEAR_GAUSSIAN_THETA`]; the expansion is poor there.
    pub near_gaussian: bool,
}

/// First-order saddlepoint estimate of `Pr(J_n - n mu_D >= n x)`.
///
/// Uses the continuous Bahadur–Rao form
/// `2^(-n I(x)) / (|s*| sigma* sqrt(2 pi n))` with `s* = theta* ln 2` and
/// `sigma*^2` the curvature of the natural-log CGF at the tilt. No lattice
/// correction is applied even though `J_n` lives on a lattice of span
/// `|ell|`. For `x < 0` the estimate of the lower tail is complemented.
pub fn saddlepoint_tail(chain: &ChainParams, n: usize, x: f64) -> Result<TailEstimate> {
    check_blocklength(n)?;
    let point = rate_function(chain, x, RATE_TOL)?;
    let near_gaussian = point.theta_star.abs() < NEAR_GAUSSIAN_THETA;
    let prob = if point.theta_star == 0.0 {
        0.5
    } else {
        let s = point.theta_star * LN_2;
        let sigma = (cgf_limit_curvature(chain, point.theta_star) / LN_2).sqrt();
        let n_f = n as f64;
        let one_side = (-n_f * point.rate).exp2() / (s.abs() * sigma * (2.0 * PI * n_f).sqrt());
        if x > 0.0 {
            one_side
        } else {
            (1.0 - one_side).max(0.0)
        }
    };
    Ok(TailEstimate {
        prob,
        point,
        near_gaussian,
    })
}
