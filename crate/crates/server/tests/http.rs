use std::net::SocketAddr;

use dtapprox_client::{Client, ClientError};
use dtapprox_core::api::{
    AreaModelSpec, DatasetSpec, EmitRequest, EvaluateRequest, OptimizeRequest, ReportRequest, TrainRequest,
    TrainResponse, TreeOptions,
};
use dtapprox_core::moo::GaConfig;
use dtapprox_core::pipeline::Selector;
use dtapprox_core::quantizer::{Chromosome, GeneBounds};

async fn start() -> Client {
    let (addr, _) = dtapprox_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    Client::new(format!("http://{addr}"))
}

fn iris() -> DatasetSpec {
    let csv = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../datasets/iris.csv")).unwrap();
    DatasetSpec {
        name: "iris".into(),
        csv,
        label_column: Default::default(),
        split: 0.3,
        seed: 3,
    }
}

async fn trained(client: &Client) -> TrainResponse {
    client
        .train(&TrainRequest {
            dataset: iris(),
            tree: TreeOptions::default(),
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
        })
        .await
        .unwrap()
}

fn small_ga() -> GaConfig {
    GaConfig {
        population_size: 10,
        generations: 4,
        seed: 11,
        ..GaConfig::default()
    }
}

fn api_kind(e: &ClientError) -> (u16, &str) {
    match e {
        ClientError::Api { status, body } => (*status, body.kind.as_str()),
        other => panic!("expected an API error, got {other}"),
    }
}

#[tokio::test]
async fn health_and_train() {
    let client = start().await;
    client.health().await.unwrap();
    let t = trained(&client).await;
    assert!(t.baseline.comparators > 0);
    assert_eq!(t.train_rows + t.test_rows, 150);
    assert_eq!(t.test_rows, 45);
}

#[tokio::test]
async fn evaluate_baseline_matches_train_report() {
    let client = start().await;
    let t = trained(&client).await;
    let resp = client
        .evaluate(&EvaluateRequest {
            dataset: iris(),
            tree: t.tree.clone(),
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
            chromosome: t.baseline.chromosome.clone(),
        })
        .await
        .unwrap();
    assert_eq!(resp.objectives, t.baseline.objectives());

    let short = Chromosome::new(vec![]);
    let err = client
        .evaluate(&EvaluateRequest {
            dataset: iris(),
            tree: t.tree,
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
            chromosome: short,
        })
        .await
        .unwrap_err();
    assert_eq!(api_kind(&err), (400, "chromosome"));
}

#[tokio::test]
async fn job_result_equals_direct_optimize() {
    let client = start().await;
    let t = trained(&client).await;
    let req = OptimizeRequest {
        dataset: iris(),
        tree: t.tree,
        area_model: AreaModelSpec::default(),
        ga: small_ga(),
    };
    let direct = client.optimize(&req).await.unwrap();
    let mut seen = Vec::new();
    let job = client.run_job(&req, |g, total| seen.push((g, total))).await.unwrap();
    assert_eq!(direct, job);
    assert_eq!(seen.last(), Some(&(4, 4)));
    let listed = client.jobs().await.unwrap();
    assert_eq!(listed.len(), 1);
    assert!(listed[0].result.is_none());
}

#[tokio::test]
async fn failed_job_reports_user_error() {
    let client = start().await;
    let t = trained(&client).await;
    let mut ds = iris();
    ds.csv = ds
        .csv
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().1.to_string() + ",x\n")
        .collect();
    let err = client
        .run_job(
            &OptimizeRequest {
                dataset: ds,
                tree: t.tree,
                area_model: AreaModelSpec::default(),
                ga: small_ga(),
            },
            |_, _| {},
        )
        .await
        .unwrap_err();
    assert_eq!(api_kind(&err).0, 400);
    assert!(!err.is_internal());
}

#[tokio::test]
async fn bad_ga_config_is_rejected_up_front() {
    let client = start().await;
    let t = trained(&client).await;
    let err = client
        .submit(&OptimizeRequest {
            dataset: iris(),
            tree: t.tree,
            area_model: AreaModelSpec::default(),
            ga: GaConfig {
                population_size: 3,
                ..small_ga()
            },
        })
        .await
        .unwrap_err();
    assert_eq!(api_kind(&err), (400, "invalid_argument"));
}

#[tokio::test]
async fn unknown_job_is_404() {
    let client = start().await;
    let err = client.job(999).await.unwrap_err();
    assert_eq!(api_kind(&err), (404, "not_found"));
}

#[tokio::test]
async fn pure_dataset_and_malformed_json() {
    let client = start().await;
    let err = client
        .train(&TrainRequest {
            dataset: DatasetSpec {
                name: "flat".into(),
                csv: "x,y\n0.1,a\n0.2,b\n0.1,a\n0.2,b\n0.3,b\n".into(),
                label_column: Default::default(),
                split: 0.3,
                seed: 0,
            },
            tree: TreeOptions {
                max_depth: Some(0),
                ..TreeOptions::default()
            },
            area_model: AreaModelSpec::default(),
            bounds: GeneBounds::default(),
        })
        .await
        .unwrap_err();
    assert_eq!(api_kind(&err), (400, "no_comparators"));
    assert_eq!(err.to_string(), "tree has no comparators");

    let raw = raw_post(client.base_url(), "/v1/train", "{not json").await;
    assert_eq!(raw.0, 400);
    assert!(raw.1.contains("\"kind\":\"json\""), "{}", raw.1);
}

/// Minimal HTTP/1.1 POST so the test can send bytes the typed client cannot.
async fn raw_post(base: &str, path: &str, body: &str) -> (u16, String) {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let host = base.trim_start_matches("http://");
    let mut stream = tokio::net::TcpStream::connect(host).await.unwrap();
    let req = format!(
        "POST {path} HTTP/1.1\r\nHost: {host}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).await.unwrap();
    let status = buf[9..12].parse().unwrap();
    (status, buf)
}

#[tokio::test]
async fn emit_and_report_round_trip() {
    let client = start().await;
    let t = trained(&client).await;
    let run = client
        .optimize(&OptimizeRequest {
            dataset: iris(),
            tree: t.tree.clone(),
            area_model: AreaModelSpec::default(),
            ga: small_ga(),
        })
        .await
        .unwrap();
    let emit = |selector| EmitRequest {
        dataset: iris(),
        tree: t.tree.clone(),
        bounds: GeneBounds::default(),
        members: run.evolution.front.members.clone(),
        baseline_error: run.evolution.baseline.error,
        selector,
        module_name: None,
    };
    let ok = client.emit(&emit(Selector::BestAreaWithin(0.01))).await.unwrap();
    assert!(ok.design.verilog.starts_with(&format!("module dt_iris_{} (", ok.index)));
    assert_eq!(ok.design.checked_rows, 45);

    let err = client.emit(&emit(Selector::Index(10_000))).await.unwrap_err();
    assert_eq!(api_kind(&err), (400, "selection"));

    let report = client
        .report(&ReportRequest {
            runs: vec![run.summary(), run.summary()],
            accuracy_threshold: 0.01,
        })
        .await
        .unwrap();
    assert_eq!(report.plots.len(), 2);
    assert_eq!(report.rows[0].member, ok.index);

    let err = client
        .report(&ReportRequest {
            runs: vec![],
            accuracy_threshold: 0.01,
        })
        .await
        .unwrap_err();
    assert_eq!(api_kind(&err), (400, "invalid_argument"));
}
