//! Deterministic quadrature of the bit-flip failure probability.
//!
//! Write each deviation as `Δ̄ᵢ = nᵢ√π + rᵢ` with `rᵢ ∈ [-√π/2, √π/2)` and
//! `eᵢ = nᵢ mod 2`. Folding removes every other integer, leaving
//!
//! ```text
//! M₁ = fold(Δ̄₁ - n₃√π, 2√π),  M₂ = fold(Δ̄₂ + n₃√π, 2√π),  Δ_m,A3 = r₃
//! ```
//!
//! so `|Mᵢ|` is `|rᵢ|` when `eᵢ = e₃` and `√π - |rᵢ|` otherwise. The
//! single-error candidate is the true pattern exactly when `e₃ = 0`, and the
//! analog comparison reduces to `|M₁| + |M₂| + |r₃| <= 3√π/2`. The failure
//! probability is therefore a sum over the eight parity classes of a 2-D
//! Simpson integral over `(|r₁|, |r₂|)` whose inner `|r₃|` integral is
//! evaluated in closed form.

use rayon::prelude::*;

use super::{fails, BlockState};
use crate::error::{Error, Result};
use crate::gkp::{likelihood_f, NoiseParams, ResidualLaw, HALF_SQRT_PI, SQRT_PI};
use crate::quad::simpson_weights;
use crate::Decoder;

/// Half-width of the box used by [`indicator_quadrature`], in units of sigma.
pub const ORACLE_CUTOFF: f64 = 8.0;

pub const MIN_GRID: usize = 100;

fn validate(sigma: f64, grid: usize) -> Result<NoiseParams> {
    let params = NoiseParams::new(sigma)?;
    if grid < MIN_GRID {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least {MIN_GRID}, got {grid}"
        )));
    }
    Ok(params)
}

// Simpson needs an even interval count.
fn even(grid: usize) -> usize {
    grid + grid % 2
}

/// Probability that `decoder` returns a pattern other than the true one.
///
/// `grid` is the number of Simpson intervals per residual axis (rounded up
/// to even). The digital decoder fails exactly when two or more qubits sit
/// on odd lattice indices, which is closed form and ignores `grid`.
pub fn oracle_failure_probability(sigma: f64, decoder: Decoder, grid: usize) -> Result<f64> {
    let params = validate(sigma, grid)?;
    let law = ResidualLaw::new(params);
    let (even_mass, odd_mass) = (law.mass(0), law.mass(1));
    Ok(match decoder {
        Decoder::Digital => 3.0 * odd_mass * odd_mass * even_mass + odd_mass.powi(3),
        Decoder::Analog => analog_failure(&law, even(grid)),
    })
}

fn analog_failure(law: &ResidualLaw, intervals: usize) -> f64 {
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
    let upper_mass0 = law.mass(0);

    // e = (1,1,1): both M values flip, the decoder declares no error
    let mut total = law.mass(1).powi(3);
    for e3 in 0..2u8 {
        for e1 in 0..2u8 {
            for e2 in 0..2u8 {
                if e1 == e3 && e2 == e3 {
                    continue;
                }
                let slabs: Vec<f64> = (0..nodes.len())
                    .into_par_iter()
                    .map(|i| {
                        let v1 = if e1 == e3 {
                            nodes[i]
                        } else {
                            SQRT_PI - nodes[i]
                        };
                        let mut row = 0.0;
                        for (j, &u2) in nodes.iter().enumerate() {
                            let v2 = if e2 == e3 { u2 } else { SQRT_PI - u2 };
                            let limit = 1.5 * SQRT_PI - v1 - v2;
                            // P1 wins when |r₃| <= limit; it is wrong iff e₃ = 1
                            let inner = if e3 == 0 {
                                upper_mass0 - law.mass_below(0, limit)
                            } else {
                                law.mass_below(1, limit)
                            };
                            row += dens[e2 as usize][j] * inner;
                        }
                        dens[e1 as usize][i] * row
                    })
                    .collect();
                total += slabs.iter().sum::<f64>();
            }
        }
    }
    total
}

/// Brute-force cross-check: tensor-product Simpson of the failure
/// indicator over `[-8σ, 8σ]³`, calling the decoders directly.
///
/// The integrand is discontinuous, so this converges only linearly in the
/// node spacing; use it to validate [`oracle_failure_probability`], not in
/// its place.
pub fn indicator_quadrature(sigma: f64, decoder: Decoder, grid: usize) -> Result<f64> {
    validate(sigma, grid)?;
    let intervals = even(grid);
    let lo = -ORACLE_CUTOFF * sigma;
    let h = 2.0 * ORACLE_CUTOFF * sigma / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| lo + i as f64 * h).collect();
    let weights: Vec<f64> = simpson_weights(intervals, h)
        .into_iter()
        .zip(&nodes)
        .map(|(w, &x)| w * likelihood_f(x, sigma))
        .collect();
    // slabs are summed in index order so the pool size does not matter
    let slabs: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut slab = 0.0;
            for (j, &wj) in weights.iter().enumerate() {
                let mut row = 0.0;
                for (k, &wk) in weights.iter().enumerate() {
                    let st = BlockState::new([nodes[i], nodes[j], nodes[k]]);
                    if fails(&st, 0, sigma, decoder) {
                        row += wk;
                    }
                }
                slab += wj * row;
            }
            weights[i] * slab
        })
        .collect();
    Ok(slabs.iter().sum())
}
