//! Run configuration: a flat TOML file whose keys mirror the long flags
//! (`label_col` for `--label-col`), overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use dtapprox_core::api::{AreaModelSpec, TreeOptions, DEFAULT_SPLIT};
use dtapprox_core::area::GateWeights;
use dtapprox_core::dataset::LabelColumn;
use dtapprox_core::moo::GaConfig;
use dtapprox_core::quantizer::GeneBounds;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum AreaKind {
    #[default]
    Analytical,
    Lut,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with the same keys as these flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Service URL; without it an in-process service is started.
    #[arg(long, global = true)]
    pub server: Option<String>,

    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// `last`, a 0-based column index, or a header name.
    #[arg(long, global = true)]
    pub label_col: Option<String>,
    /// Test fraction.
    #[arg(long, global = true)]
    pub split: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_depth: Option<usize>,

    #[arg(long, global = true)]
    pub pop: Option<usize>,
    #[arg(long, global = true)]
    pub gens: Option<usize>,
    #[arg(long, global = true)]
    pub pmin: Option<u32>,
    #[arg(long, global = true)]
    pub pmax: Option<u32>,
    #[arg(long, global = true)]
    pub margin: Option<i32>,

    #[arg(long, global = true, value_enum)]
    pub area_model: Option<AreaKind>,
    #[arg(long, global = true)]
    pub lut: Option<PathBuf>,

    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Front member: an index or `best-area-within <loss>`.
    #[arg(long, global = true)]
    pub select: Option<String>,
    /// Allowed accuracy loss for the report's chosen member.
    #[arg(long, global = true)]
    pub accuracy_threshold: Option<f64>,
    /// Run directory to report on; repeatable.
    #[arg(long = "run", global = true)]
    pub runs: Vec<PathBuf>,
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    server: Option<String>,
    dataset: Option<PathBuf>,
    label_col: Option<LabelColumn>,
    split: Option<f64>,
    seed: Option<u64>,
    max_depth: Option<usize>,
    pop: Option<usize>,
    gens: Option<usize>,
    pmin: Option<u32>,
    pmax: Option<u32>,
    margin: Option<i32>,
    eta_c: Option<f64>,
    eta_m: Option<f64>,
    crossover_prob: Option<f64>,
    mutation_prob: Option<f64>,
    area_model: Option<AreaKind>,
    lut: Option<PathBuf>,
    weights: Option<GateWeights>,
    out: Option<PathBuf>,
    select: Option<String>,
    accuracy_threshold: Option<f64>,
    runs: Option<Vec<PathBuf>>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub server: Option<String>,
    #[serde(skip)]
    pub dataset: Option<PathBuf>,
    pub label_col: LabelColumn,
    pub split: f64,
    pub seed: u64,
    pub tree: TreeOptions,
    pub ga: GaConfig,
    pub area_model: AreaKind,
    pub weights: GateWeights,
    #[serde(skip)]
    pub lut: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub select: Option<String>,
    pub accuracy_threshold: f64,
    #[serde(skip)]
    pub runs: Vec<PathBuf>,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(flags: &Overrides) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
                let mut cfg: FileConfig =
                    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
                // paths in a config file are relative to the file
                let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
                cfg.dataset = cfg.dataset.map(|p| resolve(&base, p));
                cfg.lut = cfg.lut.map(|p| resolve(&base, p));
                cfg.out = cfg.out.map(|p| resolve(&base, p));
                cfg.runs = cfg.runs.map(|v| v.into_iter().map(|p| resolve(&base, p)).collect());
                cfg
            }
            None => FileConfig::default(),
        };
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let defaults = GaConfig::default();
        let bounds = GeneBounds {
            p_min: flags.pmin.or(file.pmin).unwrap_or(GeneBounds::default().p_min),
            p_max: flags.pmax.or(file.pmax).unwrap_or(GeneBounds::default().p_max),
            margin: flags.margin.or(file.margin).unwrap_or(GeneBounds::default().margin),
        };
        let ga = GaConfig {
            population_size: flags.pop.or(file.pop).unwrap_or(defaults.population_size),
            generations: flags.gens.or(file.gens).unwrap_or(defaults.generations),
            eta_c: file.eta_c.unwrap_or(defaults.eta_c),
            eta_m: file.eta_m.unwrap_or(defaults.eta_m),
            crossover_prob: file.crossover_prob.unwrap_or(defaults.crossover_prob),
            mutation_prob: file.mutation_prob,
            seed,
            bounds,
            parallel: true,
        };
        let label_col = match &flags.label_col {
            Some(s) => s.parse().expect("infallible"),
            None => file.label_col.unwrap_or_default(),
        };
        let mut runs = flags.runs.clone();
        if runs.is_empty() {
            runs = file.runs.unwrap_or_default();
        }
        let cfg = RunConfig {
            server: flags.server.clone().or(file.server),
            dataset: flags.dataset.clone().or(file.dataset),
            label_col,
            split: flags.split.or(file.split).unwrap_or(DEFAULT_SPLIT),
            seed,
            tree: TreeOptions {
                max_depth: flags.max_depth.or(file.max_depth),
                min_samples_split: 2,
            },
            ga,
            area_model: flags.area_model.or(file.area_model).unwrap_or_default(),
            weights: file.weights.unwrap_or_default(),
            lut: flags.lut.clone().or(file.lut),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            select: flags.select.clone().or(file.select),
            accuracy_threshold: flags.accuracy_threshold.or(file.accuracy_threshold).unwrap_or(0.01),
            runs,
        };
        cfg.ga.bounds.validate()?;
        Ok(cfg)
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        match &self.dataset {
            Some(p) => Ok(p),
            None => bail!("no dataset given (use --dataset or `dataset` in the config)"),
        }
    }

    pub fn area_spec(&self) -> Result<AreaModelSpec> {
        Ok(match self.area_model {
            AreaKind::Analytical => AreaModelSpec::Analytical { weights: self.weights },
            AreaKind::Lut => {
                let Some(path) = &self.lut else {
                    bail!("--area-model lut needs --lut <path>");
                };
                let csv = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                AreaModelSpec::Lut { csv }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::load(&Overrides::default()).unwrap();
        assert_eq!(cfg.split, 0.3);
        assert_eq!(
            cfg.ga.bounds,
            GeneBounds {
                p_min: 2,
                p_max: 8,
                margin: 5
            }
        );
        assert_eq!(cfg.ga.population_size, 100);
        assert_eq!(cfg.area_model, AreaKind::Analytical);
        assert_eq!(cfg.label_col, LabelColumn::Last);
        assert_eq!(cfg.accuracy_threshold, 0.01);
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "dataset = \"data/x.csv\"\nseed = 4\npop = 20\ngens = 7\nlabel_col = 2\n[weights]\ninv = 1.0\nand2 = 3.0\nor2 = 3.0\n",
        )
        .unwrap();
        let flags = Overrides {
            config: Some(path),
            seed: Some(9),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(&flags).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ga.seed, 9);
        assert_eq!(cfg.ga.population_size, 20);
        assert_eq!(cfg.ga.generations, 7);
        assert_eq!(cfg.label_col, LabelColumn::Index(2));
        assert_eq!(cfg.weights.and2, 3.0);
        assert_eq!(cfg.dataset.unwrap(), dir.path().join("data/x.csv"));
    }

    #[test]
    fn unknown_keys_and_bad_bounds_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "populaton = 3\n").unwrap();
        assert!(RunConfig::load(&Overrides {
            config: Some(path),
            ..Overrides::default()
        })
        .is_err());
        let flags = Overrides {
            pmin: Some(9),
            ..Overrides::default()
        };
        assert!(RunConfig::load(&flags).is_err());
    }

    #[test]
    fn lut_needs_a_path() {
        let flags = Overrides {
            area_model: Some(AreaKind::Lut),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(&flags).unwrap();
        assert!(cfg.area_spec().is_err());
    }
}
