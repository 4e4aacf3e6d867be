use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{polynomial_mutation, sbx_crossover, tournament_select};
use super::sorting::{hypervolume, nondominated_fronts, survival_crowding};
use super::{GaConfig, GenerationStats, Individual, ParetoFront, Provenance};
use crate::error::{Error, Result};
use crate::evaluator::{EvalContext, Objectives};
use crate::quantizer::{Chromosome, Gene};
use crate::rng::{self, Rng, Stream};
use rand::Rng as _;

/// Outcome of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub front: ParetoFront,
    /// Generation 0 is the initial population.
    pub history: Vec<GenerationStats>,
    pub baseline: Objectives,
    /// Hypervolume reference: error 1, area twice the baseline area.
    pub reference: Objectives,
}

pub fn evolve(ctx: &EvalContext, cfg: &GaConfig) -> Result<Evolution> {
    evolve_with_observer(ctx, cfg, |_, _| {})
}

/// Like [`evolve`], calling `observer(generation, created)` with every batch
/// of newly created and evaluated individuals (the initial population, then
/// each generation's offspring).
pub fn evolve_with_observer<F>(ctx: &EvalContext, cfg: &GaConfig, mut observer: F) -> Result<Evolution>
where
    F: FnMut(usize, &[Individual]),
{
    cfg.validate()?;
    if cfg.bounds != *ctx.bounds() {
        return Err(Error::InvalidArgument(
            "GA gene bounds differ from the evaluation context".into(),
        ));
    }
    let n = ctx.comparator_count();
    if n == 0 {
        return Err(Error::NoComparators);
    }
    let mu = cfg.population_size;
    let mut rng = rng::stream(cfg.seed, Stream::Evolve);

    let mut chroms = Vec::with_capacity(mu);
    chroms.push(ctx.baseline());
    while chroms.len() < mu {
        chroms.push(random_chromosome(n, cfg, &mut rng));
    }
    let mut pop = evaluate_all(ctx, chroms, cfg.parallel)?;
    let baseline = pop[0].obj;
    let reference = Objectives {
        error: 1.0,
        area: 2.0 * baseline.area,
    };
    observer(0, &pop);
    assign_ranks(&mut pop);

    let mut history = vec![stats(0, &pop, reference)];
    for generation in 1..=cfg.generations {
        let mut children = Vec::with_capacity(mu);
        while children.len() < mu {
            let a = tournament_select(&pop, &mut rng)?;
            let b = tournament_select(&pop, &mut rng)?;
            let (c1, c2) = sbx_crossover(&pop[a].chrom, &pop[b].chrom, cfg, &mut rng)?;
            children.push(polynomial_mutation(&c1, cfg, &mut rng));
            children.push(polynomial_mutation(&c2, cfg, &mut rng));
        }
        let offspring = evaluate_all(ctx, children, cfg.parallel)?;
        observer(generation, &offspring);
        pop.extend(offspring);
        pop = survive(pop, mu);
        history.push(stats(generation, &pop, reference));
    }

    let mut members: Vec<Individual> = Vec::new();
    for ind in pop.into_iter().filter(|i| i.rank == 0) {
        if !members.iter().any(|m| m.chrom == ind.chrom) {
            members.push(ind);
        }
    }
    members.sort_by(|a, b| {
        a.obj
            .error
            .total_cmp(&b.obj.error)
            .then(a.obj.area.total_cmp(&b.obj.area))
            .then_with(|| gene_key(&a.chrom).cmp(&gene_key(&b.chrom)))
    });
    Ok(Evolution {
        front: ParetoFront {
            members,
            provenance: Provenance {
                config: cfg.clone(),
                seed: cfg.seed,
                generations: cfg.generations,
            },
        },
        history,
        baseline,
        reference,
    })
}

fn gene_key(c: &Chromosome) -> Vec<(u32, i32)> {
    c.genes.iter().map(|g| (g.precision, g.delta)).collect()
}

fn random_chromosome(n: usize, cfg: &GaConfig, rng: &mut Rng) -> Chromosome {
    let b = &cfg.bounds;
    Chromosome::new(
        (0..n)
            .map(|_| Gene {
                precision: rng.random_range(b.p_min..=b.p_max),
                delta: rng.random_range(-b.margin..=b.margin),
            })
            .collect(),
    )
}

/// Evaluation is pure, so the parallel map returns exactly what the
/// sequential one would, in the same order.
fn evaluate_all(ctx: &EvalContext, chroms: Vec<Chromosome>, parallel: bool) -> Result<Vec<Individual>> {
    let eval = |chrom: Chromosome| {
        ctx.evaluate(&chrom).map(|obj| Individual {
            chrom,
            obj,
            rank: 0,
            crowding: 0.0,
        })
    };
    if parallel {
        chroms.into_par_iter().map(eval).collect()
    } else {
        chroms.into_iter().map(eval).collect()
    }
}

fn assign_ranks(pop: &mut [Individual]) {
    let objs: Vec<Objectives> = pop.iter().map(|i| i.obj).collect();
    for (rank, front) in nondominated_fronts(&objs).iter().enumerate() {
        let fo: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(survival_crowding(&fo)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
}

/// (mu + lambda) truncation: whole fronts while they fit, then the last
/// admitted front by descending crowding distance.
fn survive(mut pool: Vec<Individual>, mu: usize) -> Vec<Individual> {
    assign_ranks(&mut pool);
    let objs: Vec<Objectives> = pool.iter().map(|i| i.obj).collect();
    let mut keep: Vec<usize> = Vec::with_capacity(mu);
    for front in nondominated_fronts(&objs) {
        if keep.len() + front.len() <= mu {
            keep.extend(front);
            continue;
        }
        let mut rest = front;
        rest.sort_by(|&a, &b| pool[b].crowding.total_cmp(&pool[a].crowding).then(a.cmp(&b)));
        keep.extend(rest.into_iter().take(mu - keep.len()));
        break;
    }
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("index kept once"))
        .collect()
}

fn stats(generation: usize, pop: &[Individual], reference: Objectives) -> GenerationStats {
    let front: Vec<&Individual> = pop.iter().filter(|i| i.rank == 0).collect();
    let mut distinct: Vec<&Chromosome> = Vec::new();
    for ind in &front {
        if !distinct.contains(&&ind.chrom) {
            distinct.push(&ind.chrom);
        }
    }
    let points: Vec<Objectives> = front.iter().map(|i| i.obj).collect();
    GenerationStats {
        generation,
        best_error: pop.iter().map(|i| i.obj.error).fold(f64::INFINITY, f64::min),
        min_area: pop.iter().map(|i| i.obj.area).fold(f64::INFINITY, f64::min),
        front_size: distinct.len(),
        hypervolume: hypervolume(&points, reference),
    }
}
