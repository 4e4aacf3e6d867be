//! Elitist NSGA-II over (precision, offset) chromosomes.

mod engine;
mod operators;
mod sorting;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::Objectives;
use crate::quantizer::{Chromosome, GeneBounds};

pub use engine::{evolve, evolve_with_observer, Evolution};
pub use operators::{mutation_delta, polynomial_mutation, sbx_beta, sbx_crossover, sbx_pair, tournament_select};
pub use sorting::{crowding_distance, dominates, hypervolume, nondominated_fronts, survival_crowding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub chrom: Chromosome,
    pub obj: Objectives,
    /// Front index, 0 = non-dominated.
    pub rank: usize,
    /// Only meaningful inside a run; not serialized (may be infinite).
    #[serde(skip, default)]
    pub crowding: f64,
}

/// Sorts `pop` into fronts and records each individual's rank.
pub fn fast_nondominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objs: Vec<Objectives> = pop.iter().map(|i| i.obj).collect();
    let fronts = nondominated_fronts(&objs);
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = rank;
        }
    }
    fronts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Even, at least 4.
    pub population_size: usize,
    pub generations: usize,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Polynomial mutation distribution index.
    pub eta_m: f64,
    pub crossover_prob: f64,
    /// Per scalar gene; `None` means `1 / (2N)`.
    pub mutation_prob: Option<f64>,
    pub seed: u64,
    pub bounds: GeneBounds,
    /// Fan fitness evaluation out over threads. Results do not depend on it.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 100,
            eta_c: 20.0,
            eta_m: 20.0,
            crossover_prob: 0.9,
            mutation_prob: None,
            seed: 0,
            bounds: GeneBounds::default(),
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return bad(format!(
                "population size {} must be even and >= 4",
                self.population_size
            ));
        }
        if self.generations < 1 {
            return bad("generations must be >= 1".into());
        }
        if !(self.eta_c > 0.0 && self.eta_c.is_finite()) || !(self.eta_m > 0.0 && self.eta_m.is_finite()) {
            return bad("distribution indices must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad(format!("crossover probability {} not in [0, 1]", self.crossover_prob));
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("mutation probability {p} not in [0, 1]"));
            }
        }
        self.bounds.validate()
    }

    pub fn mutation_prob_for(&self, comparators: usize) -> f64 {
        self.mutation_prob
            .unwrap_or_else(|| 1.0 / (2 * comparators.max(1)) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_error: f64,
    pub min_area: f64,
    pub front_size: usize,
    pub hypervolume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: GaConfig,
    pub seed: u64,
    pub generations: usize,
}

/// Rank-0 members of the final population, deduplicated by chromosome and
/// ordered by (error, area).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
    pub provenance: Provenance,
}

impl ParetoFront {
    pub fn is_mutually_nondominated(&self) -> bool {
        self.members
            .iter()
            .all(|a| self.members.iter().all(|b| !dominates(&a.obj, &b.obj)))
    }
}
