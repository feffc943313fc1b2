//! Stationary two-state Markov chains.
//!
//! The chain has transition matrix
//!
//! ```text
//! P = | 1-a   a  |
//!     |  b   1-b |
//! ```
//!
//! with stationary law `pi = (b, a) / (a + b)` and second eigenvalue
//! `lambda2 = 1 - a - b`. Everything downstream is expressed through these
//! quantities and the log-ratio `ell = log2(a / b)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_blocklength, Error, Result};

/// Parameters closer than this to 0 or 1 are rejected.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum State {
    Zero = 0,
    One = 1,
}

impl State {
    pub const ALL: [State; 2] = [State::Zero, State::One];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn flip(self) -> State {
        match self {
            State::Zero => State::One,
            State::One => State::Zero,
        }
    }
}

/// Transition parameters of a binary chain together with its derived
/// stationary and spectral quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    a: f64,
    b: f64,
    pi0: f64,
    pi1: f64,
    lambda2: f64,
    ell: f64,
}

impl ChainParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_open_unit("a", a)?;
        check_open_unit("b", b)?;
        let s = a + b;
        Ok(ChainParams {
            a,
            b,
            pi0: b / s,
            pi1: a / s,
            lambda2: 1.0 - a - b,
            ell: a.log2() - b.log2(),
        })
    }

    /// Probability of the 0 -> 1 transition.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Probability of the 1 -> 0 transition.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn pi(&self, x: State) -> f64 {
        match x {
            State::Zero => self.pi0,
            State::One => self.pi1,
        }
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `log2(a / b)` in bits; zero exactly when `a == b`.
    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn is_symmetric(&self) -> bool {
        self.a == self.b
    }

    /// `1 - |lambda2| = min(a + b, 2 - a - b)`.
    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda2.abs()
    }

    /// Variance amplification `(1 + lambda2) / (1 - lambda2)` of the
    /// occupation count relative to an i.i.d. source with the same marginal.
    pub fn amplification(&self) -> f64 {
        (1.0 + self.lambda2) / (1.0 - self.lambda2)
    }

    pub fn transition(&self, from: State, to: State) -> f64 {
        match (from, to) {
            (State::Zero, State::Zero) => 1.0 - self.a,
            (State::Zero, State::One) => self.a,
            (State::One, State::Zero) => self.b,
            (State::One, State::One) => 1.0 - self.b,
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.a, self.a], [self.b, 1.0 - self.b]]
    }

    /// Same chain with the state labels exchanged.
    pub fn relabeled(&self) -> ChainParams {
        ChainParams {
            a: self.b,
            b: self.a,
            pi0: self.pi1,
            pi1: self.pi0,
            lambda2: self.lambda2,
            ell: -self.ell,
        }
    }

    /// `Cov(1{X_s = 1}, 1{X_{s+k} = 1}) = pi0 * pi1 * lambda2^k`.
    pub fn indicator_autocov(&self, k: u64) -> f64 {
        self.pi0 * self.pi1 * signed_pow(self.lambda2, k)
    }
}

pub fn derive_chain(a: f64, b: f64) -> Result<ChainParams> {
    ChainParams::new(a, b)
}

pub fn indicator_autocov(chain: &ChainParams, k: u64) -> f64 {
    chain.indicator_autocov(k)
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if (BOUNDARY_EPS..=1.0 - BOUNDARY_EPS).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            range: format!("[{BOUNDARY_EPS:e}, 1 - {BOUNDARY_EPS:e}]"),
        })
    }
}

/// `r^k` for `|r| < 1`, flushed to zero once the magnitude drops below 1e-300.
pub(crate) fn signed_pow(r: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if r == 0.0 {
        return 0.0;
    }
    let log_mag = k as f64 * r.abs().ln();
    if log_mag < (1e-300f64).ln() {
        return 0.0;
    }
    let mag = match i32::try_from(k) {
        Ok(k) => r.abs().powi(k),
        Err(_) => log_mag.exp(),
    };
    if r < 0.0 && k % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// A sampled path of the stationary chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    states: Vec<State>,
    seed: u64,
    stream: u64,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Occupation count of state 1.
    pub fn ones(&self) -> usize {
        self.states.iter().filter(|&&x| x == State::One).count()
    }
}

/// Draws `X_1 ~ pi` and then `n - 1` transitions. The path is a pure function
/// of `(seed, n)`.
pub fn sample_trajectory(chain: &ChainParams, n: usize, seed: u64) -> Result<Trajectory> {
    sample_trajectory_stream(chain, n, seed, 0)
}

/// Like [`sample_trajectory`] but on an independent ChaCha stream, so that
/// replication `r` of a simulation is determined by `(seed, r)` alone.
pub fn sample_trajectory_stream(
    chain: &ChainParams,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    check_blocklength(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut states = Vec::with_capacity(n);
    let mut x = if rng.random::<f64>() < chain.pi0 {
        State::Zero
    } else {
        State::One
    };
    states.push(x);
    for _ in 1..n {
        let u: f64 = rng.random();
        x = match x {
            State::Zero if u < chain.a => State::One,
            State::One if u < chain.b => State::Zero,
            stay => stay,
        };
        states.push(x);
    }
    Ok(Trajectory {
        states,
        seed,
        stream,
    })
}
