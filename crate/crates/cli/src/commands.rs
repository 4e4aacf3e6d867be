use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dtapprox_client::Client;
use dtapprox_core::api::{DatasetSpec, EmitRequest, OptimizeRequest, OptimizeResponse, ReportRequest, TrainRequest};
use dtapprox_core::dtree::TreeDoc;
use dtapprox_core::evaluator::Objectives;
use dtapprox_core::pipeline::{self, Baseline, Selector};
use dtapprox_core::quantizer::Chromosome;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{read_json, write_csv, write_json, write_verilog, Provenance};

#[derive(Debug, Serialize, Deserialize)]
pub struct TreeFile {
    pub provenance: Provenance,
    pub dataset: String,
    pub tree: TreeDoc,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineFile {
    pub provenance: Provenance,
    pub dataset: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub baseline: Baseline,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParetoFile {
    pub provenance: Provenance,
    pub run: OptimizeResponse,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QTreeFile {
    pub provenance: Provenance,
    pub index: usize,
    pub chromosome: Chromosome,
    pub objectives: Objectives,
    pub module_name: String,
    pub checked_rows: usize,
    pub tree: TreeDoc,
}

struct Input {
    spec: DatasetSpec,
    bytes: Vec<u8>,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn load_dataset(cfg: &RunConfig) -> Result<Input> {
    let path = cfg.dataset_path()?;
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let csv = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok(Input {
        spec: DatasetSpec {
            name: dataset_name(path),
            csv,
            label_column: cfg.label_col.clone(),
            split: cfg.split,
            seed: cfg.seed,
        },
        bytes,
    })
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn lut_bytes(cfg: &RunConfig) -> Result<Vec<u8>> {
    match (&cfg.area_model, &cfg.lut) {
        (crate::config::AreaKind::Lut, Some(p)) => {
            std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))
        }
        _ => Ok(Vec::new()),
    }
}

pub async fn train(client: &Client, cfg: &RunConfig) -> Result<()> {
    let input = load_dataset(cfg)?;
    let area_model = cfg.area_spec()?;
    let resp = client
        .train(&TrainRequest {
            dataset: input.spec.clone(),
            tree: cfg.tree,
            area_model,
            bounds: cfg.ga.bounds,
        })
        .await?;
    let out = out_dir(cfg)?;
    let prov = Provenance::new("train", cfg, &[("dataset", &input.bytes), ("lut", &lut_bytes(cfg)?)]);
    write_json(
        &out.join("tree.json"),
        &TreeFile {
            provenance: prov.clone(),
            dataset: input.spec.name.clone(),
            tree: resp.tree,
        },
    )?;
    let b = &resp.baseline;
    write_json(
        &out.join("baseline.json"),
        &BaselineFile {
            provenance: prov.clone(),
            dataset: input.spec.name.clone(),
            train_rows: resp.train_rows,
            test_rows: resp.test_rows,
            baseline: b.clone(),
        },
    )?;
    println!("dataset              {}", input.spec.name);
    println!("train/test rows      {}/{}", resp.train_rows, resp.test_rows);
    println!("comparators          {}", b.comparators);
    println!("float accuracy       {:.4}", b.float_accuracy);
    println!(
        "quantized accuracy   {:.4}  (p={}, d=0)",
        b.quantized_accuracy, cfg.ga.bounds.p_max
    );
    println!("area                 {} {}", b.area, b.area_unit);
    println!("seed                 {}", cfg.seed);
    Ok(())
}

fn tree_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("tree.json")
}

pub async fn optimize(client: &Client, cfg: &RunConfig) -> Result<()> {
    let input = load_dataset(cfg)?;
    let area_model = cfg.area_spec()?;
    let tree_file: TreeFile = read_json(&tree_path(cfg))?;
    let tree_bytes = serde_json::to_vec(&tree_file.tree)?;
    let req = OptimizeRequest {
        dataset: input.spec,
        tree: tree_file.tree,
        area_model,
        ga: cfg.ga.clone(),
    };
    let run = client
        .run_job(&req, |g, total| eprint!("\rgeneration {g}/{total}"))
        .await;
    eprintln!();
    let run = run?;
    let out = out_dir(cfg)?;
    let prov = Provenance::new(
        "optimize",
        cfg,
        &[
            ("dataset", &input.bytes),
            ("tree", &tree_bytes),
            ("lut", &lut_bytes(cfg)?),
        ],
    );
    write_csv(&out.join("pareto.csv"), &prov, &pipeline::pareto_csv(&run.rows))?;
    write_csv(
        &out.join("history.csv"),
        &prov,
        &pipeline::history_csv(&run.evolution.history),
    )?;
    let base = run.evolution.baseline;
    let members = run.rows.len();
    let best = pipeline::select(
        &run.evolution.front.members,
        base.error,
        &Selector::BestAreaWithin(cfg.accuracy_threshold),
    )
    .ok();
    write_json(
        &out.join("pareto.json"),
        &ParetoFile {
            provenance: prov,
            run: run.clone(),
        },
    )?;

    println!("front members        {members}");
    println!(
        "baseline             accuracy {:.4}, area {}",
        base.accuracy(),
        base.area
    );
    if let Some(i) = best {
        let r = &run.rows[i];
        println!(
            "best within {:.2}%    member {i}: accuracy {:.4}, area {}, normalized {}",
            cfg.accuracy_threshold * 100.0,
            r.accuracy,
            r.area,
            r.normalized_area.map_or("n/a".into(), |x| format!("{x:.3}"))
        );
    }
    println!("seed                 {}", cfg.seed);
    Ok(())
}

pub async fn emit(client: &Client, cfg: &RunConfig) -> Result<()> {
    let Some(raw) = &cfg.select else {
        bail!("emit needs --select <index | best-area-within <loss>>");
    };
    let selector: Selector = raw.parse()?;
    let input = load_dataset(cfg)?;
    let tree_file: TreeFile = read_json(&tree_path(cfg))?;
    let pareto: ParetoFile = read_json(&cfg.out.join("pareto.json"))?;
    let tree_bytes = serde_json::to_vec(&tree_file.tree)?;
    let front_bytes = serde_json::to_vec(&pareto.run.evolution.front.members)?;
    let resp = client
        .emit(&EmitRequest {
            dataset: input.spec,
            tree: tree_file.tree,
            bounds: cfg.ga.bounds,
            members: pareto.run.evolution.front.members.clone(),
            baseline_error: pareto.run.evolution.baseline.error,
            selector,
            module_name: None,
        })
        .await?;
    let out = out_dir(cfg)?;
    let prov = Provenance::new(
        "emit",
        cfg,
        &[
            ("dataset", &input.bytes),
            ("tree", &tree_bytes),
            ("front", &front_bytes),
        ],
    );
    let i = resp.index;
    let v_path = out.join(format!("member_{i}.v"));
    write_verilog(&v_path, &prov, &resp.design.verilog)?;
    write_json(
        &out.join(format!("member_{i}_qtree.json")),
        &QTreeFile {
            provenance: prov,
            index: i,
            chromosome: resp.member.chrom.clone(),
            objectives: resp.member.obj,
            module_name: resp.design.module_name.clone(),
            checked_rows: resp.design.checked_rows,
            tree: resp.design.qtree,
        },
    )?;
    println!(
        "member {i} ({}): accuracy {:.4}, area {}; netlist matches on {} test rows",
        resp.member.chrom,
        resp.member.obj.accuracy(),
        resp.member.obj.area,
        resp.design.checked_rows
    );
    println!("wrote {}", v_path.display());
    Ok(())
}

pub async fn report(client: &Client, cfg: &RunConfig) -> Result<()> {
    let mut dirs = cfg.runs.clone();
    if dirs.is_empty() && cfg.out.join("pareto.json").is_file() {
        dirs.push(cfg.out.clone());
    }
    if dirs.is_empty() {
        bail!("no runs found (use --run <dir> or run optimize first)");
    }
    let mut runs = Vec::with_capacity(dirs.len());
    let mut inputs = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let path = d.join("pareto.json");
        if !path.is_file() {
            bail!("no runs found: {} does not exist", path.display());
        }
        let p: ParetoFile = read_json(&path)?;
        inputs.push(serde_json::to_vec(&p.run.summary())?);
        runs.push(p.run.summary());
    }
    let report = client
        .report(&ReportRequest {
            runs,
            accuracy_threshold: cfg.accuracy_threshold,
        })
        .await?;
    let out = out_dir(cfg)?;
    let named: Vec<(String, Vec<u8>)> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, b)| (format!("run{i}"), b))
        .collect();
    let refs: Vec<(&str, &[u8])> = named.iter().map(|(n, b)| (n.as_str(), b.as_slice())).collect();
    let prov = Provenance::new("report", cfg, &refs);
    write_csv(&out.join("report.csv"), &prov, &report.csv)?;
    for plot in &report.plots {
        write_csv(&out.join(&plot.file_name), &prov, &plot.csv)?;
    }
    println!(
        "{:<16} {:>9} {:>10} {:>9} {:>10} {:>10}",
        "dataset", "base acc", "base area", "accuracy", "area", "norm area"
    );
    for r in &report.rows {
        println!(
            "{:<16} {:>9.4} {:>10} {:>9.4} {:>10} {:>10}",
            r.dataset,
            r.baseline_accuracy,
            r.baseline_area,
            r.accuracy,
            r.area,
            r.normalized_area.map_or("n/a".into(), |x| format!("{x:.3}"))
        );
    }
    Ok(())
}
