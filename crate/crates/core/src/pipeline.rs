//! Run-level glue: baseline summaries, front tables, member selection,
//! verified emission and report files.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::area::AreaModel;
use crate::dataset::Dataset;
use crate::dtree::{DecisionTree, TreeDoc};
use crate::error::{Error, Result};
use crate::evaluator::Objectives;
use crate::moo::{GenerationStats, Individual};
use crate::quantizer::{apply_chromosome, Chromosome, GeneBounds, QuantizedTree};
use crate::rtl::{build_netlist, emit_verilog, sanitize_identifier, verified_netlist, Netlist};

/// Slack on error comparisons; errors are ratios of small integers.
const ERROR_EPS: f64 = 1e-9;

/// The exact design next to its float reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub comparators: usize,
    pub float_accuracy: f64,
    pub quantized_accuracy: f64,
    pub area: f64,
    pub area_unit: String,
    pub chromosome: Chromosome,
}

impl Baseline {
    pub fn objectives(&self) -> Objectives {
        Objectives {
            error: 1.0 - self.quantized_accuracy,
            area: self.area,
        }
    }
}

pub fn baseline(tree: &DecisionTree, test: &Dataset, model: &AreaModel, bounds: &GeneBounds) -> Result<Baseline> {
    let n = tree.comparator_count();
    if n == 0 {
        return Err(Error::NoComparators);
    }
    let chromosome = Chromosome::baseline(n, bounds);
    let qtree = apply_chromosome(tree, &chromosome, bounds)?;
    Ok(Baseline {
        comparators: n,
        float_accuracy: tree.accuracy(test)?,
        quantized_accuracy: qtree.accuracy(test)?,
        area: model.tree_area(&qtree)?,
        area_unit: model.unit().to_string(),
        chromosome,
    })
}

/// `area / baseline`; undefined when the baseline itself costs nothing.
pub fn normalized_area(area: f64, baseline_area: f64) -> Option<f64> {
    (baseline_area > 0.0).then(|| area / baseline_area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub index: usize,
    pub chromosome: Chromosome,
    pub error: f64,
    pub accuracy: f64,
    pub area: f64,
    pub normalized_area: Option<f64>,
}

pub fn front_rows(members: &[Individual], baseline_area: f64) -> Vec<FrontRow> {
    members
        .iter()
        .enumerate()
        .map(|(index, m)| FrontRow {
            index,
            chromosome: m.chrom.clone(),
            error: m.obj.error,
            accuracy: m.obj.accuracy(),
            area: m.obj.area,
            normalized_area: normalized_area(m.obj.area, baseline_area),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn pareto_csv(rows: &[FrontRow]) -> String {
    let mut out = String::from("index,chromosome,error,accuracy,area,normalized_area\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            r.chromosome,
            r.error,
            r.accuracy,
            r.area,
            opt(r.normalized_area)
        );
    }
    out
}

pub fn history_csv(history: &[GenerationStats]) -> String {
    let mut out = String::from("generation,best_error,min_area,front_size,hypervolume\n");
    for h in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            h.generation, h.best_error, h.min_area, h.front_size, h.hypervolume
        );
    }
    out
}

/// Picks one front member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Selector {
    Index(usize),
    /// Smallest area among members whose error is at most the baseline
    /// error plus this loss.
    BestAreaWithin(f64),
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            return Ok(Selector::Index(i));
        }
        let rest = s
            .strip_prefix("best-area-within")
            .ok_or_else(|| Error::Selection(format!("unrecognized selector {s:?}")))?;
        let loss: f64 = rest
            .trim_start_matches(['=', ' '])
            .parse()
            .map_err(|_| Error::Selection(format!("bad loss in selector {s:?}")))?;
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::Selection(format!(
                "loss must be a non-negative number, got {loss}"
            )));
        }
        Ok(Selector::BestAreaWithin(loss))
    }
}

impl TryFrom<String> for Selector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Index(i) => write!(f, "{i}"),
            Selector::BestAreaWithin(l) => write!(f, "best-area-within {l}"),
        }
    }
}

impl From<Selector> for String {
    fn from(s: Selector) -> Self {
        s.to_string()
    }
}

/// Index of the member chosen by `selector`. Area ties go to the lower
/// error, then the lower index.
pub fn select(members: &[Individual], baseline_error: f64, selector: &Selector) -> Result<usize> {
    match *selector {
        Selector::Index(i) if i < members.len() => Ok(i),
        Selector::Index(i) => Err(Error::Selection(format!(
            "index {i} out of range for a front of {} members",
            members.len()
        ))),
        Selector::BestAreaWithin(loss) => {
            let limit = baseline_error + loss + ERROR_EPS;
            members
                .iter()
                .enumerate()
                .filter(|(_, m)| m.obj.error <= limit)
                .min_by(|(i, a), (j, b)| {
                    a.obj
                        .area
                        .total_cmp(&b.obj.area)
                        .then(a.obj.error.total_cmp(&b.obj.error))
                        .then(i.cmp(j))
                })
                .map(|(i, _)| i)
                .ok_or_else(|| {
                    Error::Selection(format!(
                        "no member within {loss} of the baseline error {baseline_error}"
                    ))
                })
        }
    }
}

/// A netlist that passed the equivalence gate, printed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedDesign {
    pub module_name: String,
    pub verilog: String,
    pub qtree: TreeDoc,
    /// Rows the netlist was checked against.
    pub checked_rows: usize,
}

pub fn emit_design(
    tree: &DecisionTree,
    chrom: &Chromosome,
    bounds: &GeneBounds,
    test: &Dataset,
    module_name: &str,
) -> Result<EmittedDesign> {
    emit_design_with(tree, chrom, bounds, test, module_name, build_netlist)
}

/// [`emit_design`] with a replaceable netlist builder.
pub fn emit_design_with<F>(
    tree: &DecisionTree,
    chrom: &Chromosome,
    bounds: &GeneBounds,
    test: &Dataset,
    module_name: &str,
    build: F,
) -> Result<EmittedDesign>
where
    F: FnOnce(&QuantizedTree) -> Result<Netlist>,
{
    let qtree = apply_chromosome(tree, chrom, bounds)?;
    let net = verified_netlist(&qtree, test, build)?;
    Ok(EmittedDesign {
        module_name: module_name.to_string(),
        verilog: emit_verilog(&net, module_name)?,
        qtree: qtree.to_doc(),
        checked_rows: test.len(),
    })
}

/// Module name for front member `index` of a run on `dataset`.
pub fn module_name(dataset: &str, index: usize) -> String {
    sanitize_identifier(&format!("dt_{dataset}_{index}"))
}

/// One finished optimization run, as needed for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub baseline: Objectives,
    pub members: Vec<Individual>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub baseline_accuracy: f64,
    pub baseline_area: f64,
    pub member: usize,
    pub accuracy: f64,
    pub area: f64,
    pub normalized_area: Option<f64>,
}

pub fn report_row(run: &RunSummary, accuracy_threshold: f64) -> Result<ReportRow> {
    let i = select(
        &run.members,
        run.baseline.error,
        &Selector::BestAreaWithin(accuracy_threshold),
    )?;
    let m = &run.members[i];
    Ok(ReportRow {
        dataset: run.name.clone(),
        baseline_accuracy: run.baseline.accuracy(),
        baseline_area: run.baseline.area,
        member: i,
        accuracy: m.obj.accuracy(),
        area: m.obj.area,
        normalized_area: normalized_area(m.obj.area, run.baseline.area),
    })
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("dataset,baseline_accuracy,baseline_area,member,accuracy,area,normalized_area\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.dataset,
            r.baseline_accuracy,
            r.baseline_area,
            r.member,
            r.accuracy,
            r.area,
            opt(r.normalized_area)
        );
    }
    out
}

/// Two-column plot data: accuracy against normalized area, one line per
/// front member.
pub fn plot_csv(run: &RunSummary) -> String {
    let mut out = String::from("accuracy,normalized_area\n");
    for m in &run.members {
        let _ = writeln!(
            out,
            "{},{}",
            m.obj.accuracy(),
            opt(normalized_area(m.obj.area, run.baseline.area))
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotFile {
    pub file_name: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub csv: String,
    pub plots: Vec<PlotFile>,
}

/// Summary table plus one plot file per run. Repeated run names get a
/// numeric suffix so every run keeps its own file.
pub fn report(runs: &[RunSummary], accuracy_threshold: f64) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs found".into()));
    }
    if !(accuracy_threshold.is_finite() && accuracy_threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "accuracy threshold must be non-negative, got {accuracy_threshold}"
        )));
    }
    let rows = runs
        .iter()
        .map(|r| report_row(r, accuracy_threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut plots: Vec<PlotFile> = Vec::with_capacity(runs.len());
    for run in runs {
        let stem = sanitize_identifier(&run.name);
        let mut file_name = format!("plot_{stem}.csv");
        let mut k = 2;
        while plots.iter().any(|p| p.file_name == file_name) {
            file_name = format!("plot_{stem}_{k}.csv");
            k += 1;
        }
        plots.push(PlotFile {
            file_name,
            csv: plot_csv(run),
        });
    }
    Ok(Report {
        csv: report_csv(&rows),
        rows,
        plots,
    })
}
