//! Variation and selection operators over integer genes.
//!
//! Genes are treated as reals inside SBX and polynomial mutation, then
//! rounded half-up and clamped to their bounds.

use rand::Rng;

use super::{GaConfig, Individual};
use crate::error::{Error, Result};
use crate::quantizer::{Chromosome, Gene};

fn round_clamp(x: f64, lo: i64, hi: i64) -> i64 {
    ((x + 0.5).floor() as i64).clamp(lo, hi)
}

/// Binary tournament: two distinct individuals, lower rank wins, then
/// larger crowding, then the first drawn. Returns the winner's index.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> Result<usize> {
    if pop.len() < 2 {
        return Err(Error::InvalidArgument("tournament needs at least 2 individuals".into()));
    }
    let a = rng.random_range(0..pop.len());
    let mut b = rng.random_range(0..pop.len() - 1);
    if b >= a {
        b += 1;
    }
    Ok(crowded_winner(pop, a, b))
}

fn crowded_winner(pop: &[Individual], a: usize, b: usize) -> usize {
    let (x, y) = (&pop[a], &pop[b]);
    if y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding) {
        b
    } else {
        a
    }
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta_c: f64) -> f64 {
    let e = 1.0 / (eta_c + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Raw (unrounded) SBX children of `x1`, `x2` for spread `beta`.
pub fn sbx_pair(x1: f64, x2: f64, beta: f64) -> (f64, f64) {
    (
        0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2),
        0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2),
    )
}

/// Simulated binary crossover applied gene-wise.
pub fn sbx_crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::ChromosomeLength {
            expected: a.len(),
            got: b.len(),
        });
    }
    if rng.random::<f64>() >= cfg.crossover_prob {
        return Ok((a.clone(), b.clone()));
    }
    let bounds = &cfg.bounds;
    let (p_lo, p_hi) = (i64::from(bounds.p_min), i64::from(bounds.p_max));
    let m = i64::from(bounds.margin);
    let mut c1 = Vec::with_capacity(a.len());
    let mut c2 = Vec::with_capacity(a.len());
    for (ga, gb) in a.genes.iter().zip(&b.genes) {
        let beta = sbx_beta(rng.random(), cfg.eta_c);
        let (p1, p2) = sbx_pair(f64::from(ga.precision), f64::from(gb.precision), beta);
        let beta = sbx_beta(rng.random(), cfg.eta_c);
        let (d1, d2) = sbx_pair(f64::from(ga.delta), f64::from(gb.delta), beta);
        c1.push(Gene {
            precision: round_clamp(p1, p_lo, p_hi) as u32,
            delta: round_clamp(d1, -m, m) as i32,
        });
        c2.push(Gene {
            precision: round_clamp(p2, p_lo, p_hi) as u32,
            delta: round_clamp(d2, -m, m) as i32,
        });
    }
    Ok((Chromosome::new(c1), Chromosome::new(c2)))
}

/// Polynomial perturbation `delta` for a uniform draw `u` in `[0, 1)`.
pub fn mutation_delta(u: f64, eta_m: f64) -> f64 {
    let e = 1.0 / (eta_m + 1.0);
    if u < 0.5 {
        (2.0 * u).powf(e) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(e)
    }
}

fn mutate_value<R: Rng + ?Sized>(x: i64, lo: i64, hi: i64, prob: f64, eta_m: f64, rng: &mut R) -> i64 {
    if rng.random::<f64>() >= prob || lo == hi {
        return x;
    }
    let delta = mutation_delta(rng.random(), eta_m);
    round_clamp(x as f64 + delta * (hi - lo) as f64, lo, hi)
}

/// Polynomial mutation; each of the `2N` scalar genes mutates
/// independently with the configured per-gene probability.
pub fn polynomial_mutation<R: Rng + ?Sized>(c: &Chromosome, cfg: &GaConfig, rng: &mut R) -> Chromosome {
    let prob = cfg.mutation_prob_for(c.len());
    let bounds = &cfg.bounds;
    let (p_lo, p_hi) = (i64::from(bounds.p_min), i64::from(bounds.p_max));
    let m = i64::from(bounds.margin);
    let genes = c
        .genes
        .iter()
        .map(|g| Gene {
            precision: mutate_value(i64::from(g.precision), p_lo, p_hi, prob, cfg.eta_m, rng) as u32,
            delta: mutate_value(i64::from(g.delta), -m, m, prob, cfg.eta_m, rng) as i32,
        })
        .collect();
    Chromosome::new(genes)
}
