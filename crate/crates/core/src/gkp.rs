//! GKP lattice arithmetic, the Gaussian displacement channel, and the
//! likelihood and capacity formulas shared by every decoder.
//!
//! All quantities are in quadrature units, with the code lattice spaced by
//! `√π`. A logical bit value `k` is read from a measured quadrature `q_m` as
//! the parity of the nearest lattice index, and the leftover `Δ_m` is the
//! analog information the soft decoders consume.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quad;

/// `√π`, the lattice spacing between the `|0⟩` and `|1⟩` peaks.
pub const SQRT_PI: f64 = 1.772_453_850_905_516_f64;

/// Half the lattice spacing: the decision boundary for a single readout.
pub const HALF_SQRT_PI: f64 = 0.5 * SQRT_PI;

/// Standard deviation of the Gaussian displacement channel, per quadrature.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseParams {
    sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::InvalidSigma(sigma))
        }
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// True displacement of one quadrature away from its ideal lattice point.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Deviation(pub f64);

impl Deviation {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// A quadrature readout split into its bit value and residual deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    pub bit: u8,
    /// Residual in `[-√π/2, √π/2)`.
    pub dev_m: f64,
}

/// Likelihoods of the "readout was right" and "readout was flipped" events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodPair {
    pub no_flip: f64,
    pub flip: f64,
}

/// Draws one channel displacement `v ~ N(0, σ²)`.
#[inline]
pub fn sample_displacement<R: Rng + ?Sized>(params: NoiseParams, rng: &mut R) -> Deviation {
    let z: f64 = rng.sample(StandardNormal);
    Deviation(params.sigma * z)
}

/// Reduces `x` into `[-period/2, period/2)`.
#[inline]
pub fn fold(x: f64, period: f64) -> f64 {
    debug_assert!(period > 0.0);
    let half = 0.5 * period;
    let mut y = x - period * (x / period + 0.5).floor();
    // the floor above can be off by one ulp near the cell edges
    if y >= half {
        y -= period;
    } else if y < -half {
        y += period;
    }
    y
}

/// Reads a raw quadrature value against the `√π` lattice.
///
/// Cell edges belong to the upper lattice index so the residual stays in
/// the half-open interval `[-√π/2, √π/2)`, the same convention as [`fold`].
#[inline]
pub fn measure(raw: f64) -> MeasurementOutcome {
    let dev_m = fold(raw, SQRT_PI);
    let index = ((raw - dev_m) / SQRT_PI).round();
    let bit = if index.rem_euclid(2.0) == 0.0 { 0 } else { 1 };
    MeasurementOutcome { bit, dev_m }
}

/// Gaussian density `N(0, σ²)` evaluated at `dev`.
#[inline]
pub fn likelihood_f(dev: f64, sigma: f64) -> f64 {
    let var = sigma * sigma;
    (-dev * dev / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Natural log of [`likelihood_f`], safe where the density underflows.
#[inline]
pub fn log_likelihood_f(dev: f64, sigma: f64) -> f64 {
    let var = sigma * sigma;
    -dev * dev / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

fn check_residual(dev_m: f64) -> Result<()> {
    if dev_m.abs() <= HALF_SQRT_PI {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "dev_m",
            value: dev_m,
            lo: -HALF_SQRT_PI,
            hi: HALF_SQRT_PI,
        })
    }
}

/// Likelihoods of the two explanations of a residual `dev_m`: the true
/// deviation is `dev_m` itself, or it is `√π - |dev_m|` on the other side of
/// the decision boundary. Displacements beyond one lattice spacing are
/// ignored.
pub fn leaf_pair(dev_m: f64, sigma: f64) -> Result<LikelihoodPair> {
    check_residual(dev_m)?;
    Ok(LikelihoodPair {
        no_flip: likelihood_f(dev_m, sigma),
        flip: likelihood_f(SQRT_PI - dev_m.abs(), sigma),
    })
}

/// Probability that a single readout lands within `√π/2` of the true peak.
pub fn p_corr(sigma: f64) -> f64 {
    libm::erf(HALF_SQRT_PI / (std::f64::consts::SQRT_2 * sigma))
}

/// `1 - p_corr`, computed without cancellation.
pub fn p_err(sigma: f64) -> f64 {
    libm::erfc(HALF_SQRT_PI / (std::f64::consts::SQRT_2 * sigma))
}

/// Squeezing level in dB for peak width `sigma`: `-10 log10(2σ²)`.
pub fn sigma_to_db(sigma: f64) -> f64 {
    -10.0 * (2.0 * sigma * sigma).log10()
}

pub fn db_to_sigma(db: f64) -> f64 {
    (10f64.powf(-db / 10.0) / 2.0).sqrt()
}

/// Number of lattice images summed on each side of the origin.
pub fn lattice_truncation(sigma: f64) -> i64 {
    let n = (8.0 * sigma / SQRT_PI).ceil() as i64 + 2;
    n.max(8)
}

// Exponents -(n√π + d)²/(2σ²) for |n| <= N, paired with n's parity.
fn lattice_exponents(dev_m: f64, sigma: f64) -> impl Iterator<Item = (bool, f64)> {
    let n_max = lattice_truncation(sigma);
    let two_var = 2.0 * sigma * sigma;
    (-n_max..=n_max).map(move |n| {
        let x = n as f64 * SQRT_PI + dev_m;
        (n.rem_euclid(2) == 1, -x * x / two_var)
    })
}

/// Posterior probability that a readout with residual `dev_m` was flipped,
/// summing the Gaussian over every lattice image.
pub fn posterior_flip(dev_m: f64, sigma: f64) -> Result<f64> {
    check_residual(dev_m)?;
    Ok(posterior_flip_unchecked(dev_m, sigma))
}

fn posterior_flip_unchecked(dev_m: f64, sigma: f64) -> f64 {
    let max = lattice_exponents(dev_m, sigma)
        .map(|(_, e)| e)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut odd, mut all) = (0.0, 0.0);
    for (is_odd, e) in lattice_exponents(dev_m, sigma) {
        let w = (e - max).exp();
        all += w;
        if is_odd {
            odd += w;
        }
    }
    odd / all
}

/// Marginal density of the residual: `Σ_n f(n√π + dev_m)`.
pub fn residual_density(dev_m: f64, sigma: f64) -> f64 {
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
    lattice_exponents(dev_m, sigma)
        .map(|(_, e)| e.exp())
        .sum::<f64>()
        / norm
}

/// `P(a < X < b)` for `X ~ N(0, σ²)`, accurate in both tails.
pub fn normal_mass(a: f64, b: f64, sigma: f64) -> f64 {
    if a.is_nan() || b.is_nan() || a >= b {
        return 0.0;
    }
    let s = std::f64::consts::SQRT_2 * sigma;
    if a >= 0.0 {
        0.5 * (libm::erfc(a / s) - libm::erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b / s) - libm::erfc(-a / s))
    } else {
        1.0 - 0.5 * libm::erfc(-a / s) - 0.5 * libm::erfc(b / s)
    }
}

/// Distribution of a channel deviation resolved into the parity of its
/// nearest lattice index and the magnitude `u = |Δ_m| ∈ [0, √π/2]` of its
/// residual, with every lattice image included.
#[derive(Debug, Clone, Copy)]
pub struct ResidualLaw {
    sigma: f64,
    n_max: i64,
}

impl ResidualLaw {
    pub fn new(params: NoiseParams) -> Self {
        Self {
            sigma: params.sigma(),
            n_max: lattice_truncation(params.sigma()) + 1,
        }
    }

    fn indices(&self, parity: u8) -> impl Iterator<Item = f64> {
        let parity = i64::from(parity & 1);
        (-self.n_max..=self.n_max)
            .filter(move |n| n.rem_euclid(2) == parity)
            .map(|n| n as f64 * SQRT_PI)
    }

    /// Joint density of (parity, u).
    pub fn density(&self, parity: u8, u: f64) -> f64 {
        self.indices(parity)
            .map(|c| likelihood_f(c + u, self.sigma) + likelihood_f(c - u, self.sigma))
            .sum()
    }

    /// `P(parity, u <= limit)`, with `limit` clamped to `[0, √π/2]`.
    pub fn mass_below(&self, parity: u8, limit: f64) -> f64 {
        let l = limit.clamp(0.0, HALF_SQRT_PI);
        if l == 0.0 {
            return 0.0;
        }
        self.indices(parity)
            .map(|c| normal_mass(c - l, c + l, self.sigma))
            .sum()
    }

    /// `P(parity)`.
    pub fn mass(&self, parity: u8) -> f64 {
        self.mass_below(parity, HALF_SQRT_PI)
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Hashing rate of the GKP channel when only bit values are used:
/// `1 - 2 H₂(p_err)`, one factor for each of the q and p quadratures.
pub fn hashing_rate_digital(sigma: f64) -> f64 {
    1.0 - 2.0 * binary_entropy(p_err(sigma))
}

/// Hashing rate when the residual is kept: `1 - 2 E[H₂(P(flip | Δ_m))]`.
pub fn hashing_rate_analog(sigma: f64) -> f64 {
    // integrand is even in Δ_m
    let integrand =
        |d: f64| residual_density(d, sigma) * binary_entropy(posterior_flip_unchecked(d, sigma));
    let half = quad::adaptive_simpson(integrand, 0.0, HALF_SQRT_PI, 1e-9);
    1.0 - 4.0 * half
}

/// Bisection for the sign change of a decreasing rate function.
pub fn find_threshold<F>(rate_fn: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if tol.is_nan() || tol <= 0.0 || lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "need lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let (f_lo, f_hi) = (rate_fn(lo), rate_fn(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if rate_fn(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
