//! Deterministic quadrature of the level-1 C4 failure probability for one
//! register.
//!
//! With the all-zeros word sent, leaf `i` reads bit `eᵢ` (the parity of its
//! lattice index) and residual magnitude `uᵢ`. The analog decision statistic
//! `D = (F₀₀ + F₀₁) - (F₁₀ + F₁₁)` is linear in the pair
//! `(g(u₄), g(√π - u₄))`, and their ratio is monotone in `u₄`, so the set of
//! failing `u₄` is an interval with an explicit endpoint. That leaves a 3-D
//! Simpson integral per parity pattern with a closed-form innermost mass.

use rayon::prelude::*;

use super::code::{c4_spec, PairValue};
use crate::error::{Error, Result};
use crate::gkp::{p_corr, p_err, NoiseParams, ResidualLaw, HALF_SQRT_PI, SQRT_PI};
use crate::quad::simpson_weights;
use crate::Decoder;

pub const MIN_GRID: usize = 40;

/// Smallest sigma for which the linear-domain products stay representable.
pub const MIN_SIGMA: f64 = 0.1;

/// Per-register failure probability of a level-1 round; exact ties count
/// one half.
pub fn c4_oracle_failure_probability(sigma: f64, decoder: Decoder, grid: usize) -> Result<f64> {
    let params = NoiseParams::new(sigma)?;
    if sigma < MIN_SIGMA {
        return Err(Error::OutOfRange {
            name: "sigma",
            value: sigma,
            lo: MIN_SIGMA,
            hi: f64::INFINITY,
        });
    }
    if grid < MIN_GRID {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least {MIN_GRID}, got {grid}"
        )));
    }
    let law = ResidualLaw::new(params);
    let words = signed_words();
    Ok(match decoder {
        Decoder::Digital => digital(&law, &words, sigma),
        Decoder::Analog => analog(&law, &words, sigma, grid + grid % 2),
    })
}

// (word, +1 for logical 0 / -1 for logical 1)
fn signed_words() -> Vec<(u32, f64)> {
    let spec = c4_spec();
    PairValue::ALL
        .iter()
        .flat_map(|&v| {
            let sign = if v.bits().0 == 0 { 1.0 } else { -1.0 };
            spec.class(v)
                .iter()
                .map(move |&w| (w, sign))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn pattern_mass(law: &ResidualLaw, e: u32) -> f64 {
    (0..4).map(|i| law.mass((e >> i & 1) as u8)).product()
}

fn digital(law: &ResidualLaw, words: &[(u32, f64)], sigma: f64) -> f64 {
    let (pc, pe) = (p_corr(sigma), p_err(sigma));
    (0u32..16)
        .map(|e| {
            // compare the multisets of mismatch counts so ties are exact
            let mut plus: Vec<u32> = Vec::new();
            let mut minus: Vec<u32> = Vec::new();
            for &(w, s) in words {
                let k = (w ^ e).count_ones();
                if s > 0.0 {
                    plus.push(k)
                } else {
                    minus.push(k)
                }
            }
            plus.sort_unstable();
            minus.sort_unstable();
            let fail = if plus == minus {
                0.5
            } else {
                let d: f64 = words
                    .iter()
                    .map(|&(w, s)| {
                        let k = (w ^ e).count_ones() as i32;
                        s * pc.powi(4 - k) * pe.powi(k)
                    })
                    .sum();
                if d < 0.0 {
                    1.0
                } else {
                    0.0
                }
            };
            fail * pattern_mass(law, e)
        })
        .sum()
}

fn analog(law: &ResidualLaw, words: &[(u32, f64)], sigma: f64, intervals: usize) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    let g = |x: f64| (-x * x / two_var).exp();
    let h = HALF_SQRT_PI / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    let weights = simpson_weights(intervals, h);
    let dens: [Vec<f64>; 2] = [0u8, 1].map(|e| {
        nodes
            .iter()
            .zip(&weights)
            .map(|(&u, w)| w * law.density(e, u))
            .collect()
    });
    // leaf factors: [parity-match? 0 : 1][node]
    let factors: [Vec<f64>; 2] = [
        nodes.iter().map(|&u| g(u)).collect(),
        nodes.iter().map(|&u| g(SQRT_PI - u)).collect(),
    ];

    let mut total = 0.0;
    for e in 0u32..16 {
        let e4 = (e >> 3 & 1) as u8;
        let full = law.mass(e4);
        let slabs: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|i| {
                let mut slab = 0.0;
                let mut partial = vec![0.0; words.len()];
                for j in 0..nodes.len() {
                    for (p, &(w, _)) in partial.iter_mut().zip(words) {
                        let diff = w ^ e;
                        *p = factors[(diff & 1) as usize][i] * factors[(diff >> 1 & 1) as usize][j];
                    }
                    let mut row = 0.0;
                    for k in 0..nodes.len() {
                        let (mut alpha, mut beta) = (0.0, 0.0);
                        for (&p, &(w, s)) in partial.iter().zip(words) {
                            let diff = w ^ e;
                            let prod = p * factors[(diff >> 2 & 1) as usize][k];
                            if diff >> 3 & 1 == 0 {
                                alpha += s * prod;
                            } else {
                                beta += s * prod;
                            }
                        }
                        let inner = failing_mass(law, e4, full, alpha, beta, sigma);
                        row += dens[(e >> 2 & 1) as usize][k] * inner;
                    }
                    slab += dens[(e >> 1 & 1) as usize][j] * row;
                }
                dens[(e & 1) as usize][i] * slab
            })
            .collect();
        total += slabs.iter().sum::<f64>();
    }
    total
}

/// Mass of `u₄` with `α g(u₄) + β g(√π - u₄) < 0`.
fn failing_mass(law: &ResidualLaw, e4: u8, full: f64, alpha: f64, beta: f64, sigma: f64) -> f64 {
    // g(u)/g(√π-u) = exp((π - 2√π u) / 2σ²) is decreasing in u
    let crossing =
        |rho: f64| (std::f64::consts::PI - 2.0 * sigma * sigma * rho.ln()) / (2.0 * SQRT_PI);
    if alpha > 0.0 {
        if beta >= 0.0 {
            0.0
        } else {
            full - law.mass_below(e4, crossing(-beta / alpha))
        }
    } else if alpha < 0.0 {
        if beta <= 0.0 {
            full
        } else {
            law.mass_below(e4, crossing(beta / -alpha))
        }
    } else if beta < 0.0 {
        full
    } else if beta == 0.0 {
        0.5 * full
    } else {
        0.0
    }
}
