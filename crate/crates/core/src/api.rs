//! Request and response types for the service, with the synchronous
//! handlers behind each route. Every request is self-contained: data and
//! models travel as text, so a handler's output depends only on its input.

use serde::{Deserialize, Serialize};

use crate::area::{parse_lut, AreaModel, GateWeights};
use crate::dataset::{parse_csv, prepare, LabelColumn, SplitPair};
use crate::dtree::{train_cart, CartConfig, DecisionTree, TreeDoc};
use crate::error::{Error, Result};
use crate::evaluator::{EvalContext, Objectives};
use crate::moo::{evolve_with_observer, Evolution, GaConfig, Individual};
use crate::pipeline::{self, Baseline, EmittedDesign, FrontRow, Report, RunSummary, Selector};
use crate::quantizer::{Chromosome, GeneBounds};

pub const DEFAULT_SPLIT: f64 = 0.3;

fn default_split() -> f64 {
    DEFAULT_SPLIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Short label used for module and report names.
    pub name: String,
    pub csv: String,
    #[serde(default)]
    pub label_column: LabelColumn,
    /// Test fraction.
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn prepare(&self) -> Result<SplitPair> {
        let raw = parse_csv(&self.csv, &self.label_column)?;
        prepare(&raw, self.split, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AreaModelSpec {
    Analytical {
        #[serde(default)]
        weights: GateWeights,
    },
    /// `precision,threshold,area` table.
    Lut { csv: String },
}

impl Default for AreaModelSpec {
    fn default() -> Self {
        AreaModelSpec::Analytical {
            weights: GateWeights::default(),
        }
    }
}

impl AreaModelSpec {
    pub fn build(&self) -> Result<AreaModel> {
        match self {
            AreaModelSpec::Analytical { weights } => {
                weights.validate()?;
                Ok(AreaModel::Analytical(*weights))
            }
            AreaModelSpec::Lut { csv } => Ok(AreaModel::Lut(parse_lut(csv)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeOptions {
    pub max_depth: Option<usize>,
    /// Values below 2 are raised to 2.
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub tree: TreeOptions,
    #[serde(default)]
    pub area_model: AreaModelSpec,
    #[serde(default)]
    pub bounds: GeneBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub tree: TreeDoc,
    pub baseline: Baseline,
    pub train_rows: usize,
    pub test_rows: usize,
}

pub fn train(req: &TrainRequest) -> Result<TrainResponse> {
    req.bounds.validate()?;
    let model = req.area_model.build()?;
    let data = req.dataset.prepare()?;
    let cfg = CartConfig {
        max_depth: req.tree.max_depth,
        min_samples_split: req.tree.min_samples_split.max(2),
        seed: req.dataset.seed,
    };
    let tree = train_cart(&data.train, &cfg)?;
    let baseline = pipeline::baseline(&tree, &data.test, &model, &req.bounds)?;
    Ok(TrainResponse {
        tree: TreeDoc::from(&tree),
        baseline,
        train_rows: data.train.len(),
        test_rows: data.test.len(),
    })
}

/// Test split, tree and area model shared by the later stages.
fn context(dataset: &DatasetSpec, tree: &TreeDoc, model: &AreaModelSpec, bounds: &GeneBounds) -> Result<EvalContext> {
    bounds.validate()?;
    let tree = DecisionTree::try_from(tree)?;
    let data = dataset.prepare()?;
    if let Some(n) = tree.feature_count() {
        if n != data.test.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.test.feature_count(),
            });
        }
    }
    EvalContext::new(tree, data.test, model.build()?, *bounds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub dataset: DatasetSpec,
    pub tree: TreeDoc,
    #[serde(default)]
    pub area_model: AreaModelSpec,
    #[serde(default)]
    pub bounds: GeneBounds,
    pub chromosome: Chromosome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub objectives: Objectives,
    pub accuracy: f64,
}

pub fn evaluate(req: &EvaluateRequest) -> Result<EvaluateResponse> {
    let ctx = context(&req.dataset, &req.tree, &req.area_model, &req.bounds)?;
    let objectives = ctx.evaluate(&req.chromosome)?;
    Ok(EvaluateResponse {
        objectives,
        accuracy: objectives.accuracy(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    pub dataset: DatasetSpec,
    pub tree: TreeDoc,
    #[serde(default)]
    pub area_model: AreaModelSpec,
    #[serde(default)]
    pub ga: GaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResponse {
    pub name: String,
    pub evolution: Evolution,
    pub rows: Vec<FrontRow>,
}

impl OptimizeResponse {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            name: self.name.clone(),
            baseline: self.evolution.baseline,
            members: self.evolution.front.members.clone(),
        }
    }
}

pub fn optimize(req: &OptimizeRequest) -> Result<OptimizeResponse> {
    optimize_with_progress(req, |_| {})
}

/// Calls `progress(generation)` after each generation is evaluated.
pub fn optimize_with_progress<F>(req: &OptimizeRequest, mut progress: F) -> Result<OptimizeResponse>
where
    F: FnMut(usize),
{
    req.ga.validate()?;
    let ctx = context(&req.dataset, &req.tree, &req.area_model, &req.ga.bounds)?.with_cache();
    let evolution = evolve_with_observer(&ctx, &req.ga, |g, _| progress(g))?;
    let rows = pipeline::front_rows(&evolution.front.members, evolution.baseline.area);
    Ok(OptimizeResponse {
        name: req.dataset.name.clone(),
        evolution,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitRequest {
    pub dataset: DatasetSpec,
    pub tree: TreeDoc,
    #[serde(default)]
    pub bounds: GeneBounds,
    pub members: Vec<Individual>,
    pub baseline_error: f64,
    pub selector: Selector,
    /// Defaults to a name derived from the dataset and member index.
    #[serde(default)]
    pub module_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitResponse {
    pub index: usize,
    pub member: Individual,
    pub design: EmittedDesign,
}

pub fn emit(req: &EmitRequest) -> Result<EmitResponse> {
    req.bounds.validate()?;
    let index = pipeline::select(&req.members, req.baseline_error, &req.selector)?;
    let member = req.members[index].clone();
    let tree = DecisionTree::try_from(&req.tree)?;
    let data = req.dataset.prepare()?;
    let name = req
        .module_name
        .clone()
        .unwrap_or_else(|| pipeline::module_name(&req.dataset.name, index));
    let design = pipeline::emit_design(&tree, &member.chrom, &req.bounds, &data.test, &name)?;
    Ok(EmitResponse { index, member, design })
}

fn default_threshold() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub runs: Vec<RunSummary>,
    #[serde(default = "default_threshold")]
    pub accuracy_threshold: f64,
}

pub fn report(req: &ReportRequest) -> Result<Report> {
    pipeline::report(&req.runs, req.accuracy_threshold)
}

/// Body of every failed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    /// True when the failure is a bug rather than bad input.
    pub internal: bool,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody {
            kind: e.kind().to_string(),
            message: e.to_string(),
            internal: e.is_internal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub state: JobState,
    /// Generations completed so far.
    pub generation: usize,
    pub generations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<OptimizeResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCreated {
    pub id: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(csv: &str) -> DatasetSpec {
        DatasetSpec {
            name: "toy".into(),
            csv: csv.into(),
            label_column: LabelColumn::Last,
            split: 0.3,
            seed: 7,
        }
    }

    fn two_blobs() -> String {
        let mut s = String::from("x,y,label\n");
        for i in 0..60 {
            let class = i % 2;
            let x = if class == 0 {
                i as f64 / 200.0
            } else {
                0.7 + i as f64 / 300.0
            };
            s.push_str(&format!("{x},{},{}\n", (i * 7 % 13) as f64, ["a", "b"][class]));
        }
        s
    }

    #[test]
    fn train_then_optimize_then_emit() {
        let train_req = TrainRequest {
            dataset: spec(&two_blobs()),
            tree: TreeOptions::default(),
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
        };
        let trained = train(&train_req).unwrap();
        assert_eq!(trained.test_rows, 18);
        assert_eq!(trained.baseline.comparators, 1);

        let opt = optimize(&OptimizeRequest {
            dataset: spec(&two_blobs()),
            tree: trained.tree.clone(),
            area_model: AreaModelSpec::default(),
            ga: GaConfig {
                population_size: 8,
                generations: 3,
                ..GaConfig::default()
            },
        })
        .unwrap();
        assert_eq!(opt.rows.len(), opt.evolution.front.members.len());
        assert_eq!(opt.evolution.baseline, trained.baseline.objectives());

        let emitted = emit(&EmitRequest {
            dataset: spec(&two_blobs()),
            tree: trained.tree,
            bounds: GeneBounds::default(),
            members: opt.evolution.front.members.clone(),
            baseline_error: opt.evolution.baseline.error,
            selector: Selector::BestAreaWithin(0.0),
            module_name: None,
        })
        .unwrap();
        assert_eq!(emitted.design.module_name, format!("dt_toy_{}", emitted.index));
        assert_eq!(emitted.design.checked_rows, 18);
    }

    #[test]
    fn pure_dataset_has_no_comparators() {
        let csv = "x,label\n0.1,a\n0.2,a\n0.3,b\n0.9,b\n0.5,b\n";
        let mut req = TrainRequest {
            dataset: spec(csv),
            tree: TreeOptions {
                max_depth: Some(0),
                ..TreeOptions::default()
            },
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
        };
        let err = train(&req).unwrap_err();
        assert_eq!(err.to_string(), "tree has no comparators");
        req.tree.max_depth = None;
        assert!(train(&req).is_ok());
    }

    #[test]
    fn area_model_spec_serde() {
        let json = r#"{"kind":"analytical"}"#;
        let spec: AreaModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, AreaModelSpec::default());
        let lut: AreaModelSpec =
            serde_json::from_str(r#"{"kind":"lut","csv":"precision,threshold,area\n1,0,1\n1,1,0\n"}"#).unwrap();
        assert!(matches!(lut.build().unwrap(), AreaModel::Lut(_)));
    }

    #[test]
    fn error_body_flags_internal() {
        let b = ErrorBody::from(&Error::Equivalence { mismatches: 1, rows: 2 });
        assert!(b.internal);
        assert_eq!(b.kind, "equivalence");
        assert!(!ErrorBody::from(&Error::NoComparators).internal);
    }
}
