use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use protclust::cluster::ClusterSet;
use protclust::dist::{controller_run, worker_run, ControllerConfig, WorkerConfig};
use protclust::eval::{brute_force_pairs, cluster_stats, extract_pairs, recall_report, PairSet, RecallReport};
use protclust::format::{load_clusters, sidecar_path, write_clusters, RunMeta};
use protclust::sequence::SequenceStore;
use protclust::shared::{self, SharedConfig};
use protclust::synth::{planted_families, PlantedConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::Outputs;

#[derive(Debug, Serialize)]
pub struct DatasetInfo {
    pub checksum: String,
    pub sequences: usize,
    pub residues: usize,
}

impl DatasetInfo {
    fn of(store: &SequenceStore) -> Self {
        DatasetInfo {
            checksum: format!("{:016x}", store.checksum()),
            sequences: store.len(),
            residues: store.total_residues(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub dataset: Option<DatasetInfo>,
    pub wall_seconds: f64,
    /// Pairwise alignments performed by this command, when known.
    pub alignments: Option<u64>,
    pub details: Value,
}

impl<'a> Report<'a> {
    fn new(cfg: &'a RunConfig, store: Option<&SequenceStore>, started: Instant) -> Self {
        Report {
            version: env!("CARGO_PKG_VERSION"),
            command: &cfg.mode,
            config: cfg,
            dataset: store.map(DatasetInfo::of),
            wall_seconds: started.elapsed().as_secs_f64(),
            alignments: None,
            details: Value::Null,
        }
    }
}

/// `<out>.report.json` unless given.
pub fn report_path(out: &Path, report: Option<&Path>) -> PathBuf {
    report.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".report.json");
        PathBuf::from(name)
    })
}

fn check_clusters(cs: &ClusterSet, n: usize) -> Result<()> {
    if cs.covered().len() != n || cs.iter().any(|c| !c.contains(c.representative())) {
        return Err(CliError::Internal("result does not cover every sequence exactly".into()));
    }
    Ok(())
}

fn write_cluster_outputs(outputs: &mut Outputs, path: &Path, cs: &ClusterSet, meta: &RunMeta) -> Result<()> {
    outputs.write(path, |w| Ok(write_clusters(cs, w)?))?;
    outputs.write_json(&sidecar_path(path), meta)
}

fn write_pair_outputs(outputs: &mut Outputs, path: &Path, pairs: &PairSet) -> Result<()> {
    outputs.write(path, |w| Ok(pairs.write(w)?))?;
    if let Some(meta) = &pairs.meta {
        outputs.write_json(&sidecar_path(path), meta)?;
    }
    Ok(())
}

pub fn cluster(cfg: &RunConfig, out: &Path, report: &Path) -> Result<()> {
    let started = Instant::now();
    let store = cfg.load_store()?;
    let params = cfg.params()?;
    let shared_cfg = SharedConfig { threads: cfg.threads, granularity: cfg.granularity, jitter: None };
    info!("clustering {} sequences on {} threads", store.len(), cfg.threads);
    let run = shared::cluster(&store, &params, &cfg.thresholds, &shared_cfg);
    check_clusters(&run.clusters, store.len())?;

    let mut outputs = Outputs::new();
    write_cluster_outputs(&mut outputs, out, &run.clusters, &RunMeta::new(&store, &params, &cfg.thresholds))?;
    let mut rep = Report::new(cfg, Some(&store), started);
    rep.alignments = Some(run.stats.alignments_total());
    rep.details = json!({ "run": run.stats, "clusters": cluster_stats(&run.clusters) });
    outputs.write_json(report, &rep)?;
    outputs.commit();
    Ok(())
}

/// `:9000` listens on every interface.
fn listen_addr(addr: &str) -> String {
    if addr.starts_with(':') {
        format!("0.0.0.0{addr}")
    } else {
        addr.to_string()
    }
}

pub fn controller(cfg: &RunConfig, out: &Path, report: &Path) -> Result<()> {
    let started = Instant::now();
    let addr = cfg.listen.as_deref().ok_or_else(|| CliError::Usage("controller needs --listen".into()))?;
    let store = cfg.load_store()?;
    let params = cfg.params()?;
    let ccfg = ControllerConfig {
        batch_size: cfg.batch_size,
        granularity: cfg.granularity,
        worker_wait: Duration::from_secs(cfg.worker_wait_secs),
        capture: false,
    };
    ccfg.validate()?;
    let listener = TcpListener::bind(listen_addr(addr)).map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
    // Scripts read the bound port from this line.
    eprintln!("listening on {}", listener.local_addr()?);
    let run = controller_run(listener, &store, &ccfg)?;
    check_clusters(&run.clusters, store.len())?;

    let mut outputs = Outputs::new();
    write_cluster_outputs(&mut outputs, out, &run.clusters, &RunMeta::new(&store, &params, &cfg.thresholds))?;
    let mut rep = Report::new(cfg, Some(&store), started);
    rep.details = json!({ "run": run.stats, "clusters": cluster_stats(&run.clusters) });
    outputs.write_json(report, &rep)?;
    outputs.commit();
    Ok(())
}

pub fn worker(cfg: &RunConfig, report: Option<&Path>, fail_after: Option<usize>) -> Result<()> {
    let started = Instant::now();
    let addr = cfg.connect.as_deref().ok_or_else(|| CliError::Usage("worker needs --connect".into()))?;
    let store = cfg.load_store()?;
    let params = cfg.params()?;
    let wcfg = WorkerConfig { threads: cfg.threads, fail_after, ..WorkerConfig::default() };
    let stats = worker_run(addr, &store, &params, &cfg.thresholds, &wcfg)?;
    if stats.simulated_failure {
        eprintln!("worker: simulated failure after {} work items", fail_after.unwrap_or(0));
        std::process::exit(2);
    }
    if let Some(path) = report {
        let mut outputs = Outputs::new();
        let mut rep = Report::new(cfg, Some(&store), started);
        rep.alignments = Some(stats.alignments_representative + stats.alignments_exchange);
        rep.details = json!({ "run": stats });
        outputs.write_json(path, &rep)?;
        outputs.commit();
    }
    Ok(())
}

pub fn oracle(cfg: &RunConfig, out: &Path, report: &Path) -> Result<()> {
    let started = Instant::now();
    let store = cfg.load_store()?;
    let params = cfg.params()?;
    let truth = brute_force_pairs(&store, &params, &cfg.thresholds, cfg.threads);
    let mut outputs = Outputs::new();
    write_pair_outputs(&mut outputs, out, &truth.pairs)?;
    let mut rep = Report::new(cfg, Some(&store), started);
    rep.alignments = Some(truth.alignments);
    rep.details = json!({ "pairs": truth.pairs.len() });
    outputs.write_json(report, &rep)?;
    outputs.commit();
    Ok(())
}

pub fn extract(cfg: &RunConfig, clusters: &Path, out: &Path, report: &Path) -> Result<()> {
    let started = Instant::now();
    let store = cfg.load_store()?;
    let params = cfg.params()?;
    let meta = RunMeta::new(&store, &params, &cfg.thresholds);
    let (cs, cluster_meta) = load_clusters(clusters).map_err(|e| match e {
        protclust::error::Error::Io(io) => CliError::file(clusters, io),
        e => e.into(),
    })?;
    if let Some(m) = cluster_meta {
        m.ensure_compatible(&meta)?;
    }
    if let Some(bad) = cs.iter().flat_map(|c| c.members()).find(|&&m| m as usize >= store.len()) {
        return Err(CliError::Usage(format!("cluster member {bad} is outside the {}-sequence input", store.len())));
    }
    let found = extract_pairs(&cs, &store, &params, &cfg.thresholds, cfg.threads);
    let mut outputs = Outputs::new();
    write_pair_outputs(&mut outputs, out, &found.pairs)?;
    let mut rep = Report::new(cfg, Some(&store), started);
    rep.alignments = Some(found.alignments);
    rep.details = json!({ "pairs": found.pairs.len() });
    outputs.write_json(report, &rep)?;
    outputs.commit();
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    dataset_checksum: Option<String>,
    #[serde(flatten)]
    recall: RecallReport,
}

fn read_alignments(path: &Path) -> Result<Option<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    let v: Value = serde_json::from_str(&text)?;
    Ok(v.get("alignments").and_then(Value::as_u64))
}

fn load_pairs(path: &Path) -> Result<PairSet> {
    PairSet::load(path).map_err(|e| match e {
        protclust::error::Error::Io(io) => CliError::file(path, io),
        e => e.into(),
    })
}

pub struct EvalInputs<'a> {
    pub truth: &'a Path,
    pub found: &'a Path,
    pub cluster_report: Option<&'a Path>,
    pub extract_report: Option<&'a Path>,
}

pub fn eval(cfg: &RunConfig, inputs: &EvalInputs<'_>, out: Option<&Path>) -> Result<()> {
    let truth = load_pairs(inputs.truth)?;
    let found = load_pairs(inputs.found)?;
    let mut recall = recall_report(&truth, &found)?;
    recall.alignments_oracle = truth.meta.as_ref().map(|m| {
        let n = m.sequences as u64;
        n * n.saturating_sub(1) / 2
    });
    recall.alignments_clustering = inputs.cluster_report.map(read_alignments).transpose()?.flatten();
    recall.alignments_extraction = inputs.extract_report.map(read_alignments).transpose()?.flatten();
    let rep = EvalReport {
        version: env!("CARGO_PKG_VERSION"),
        command: &cfg.mode,
        config: cfg,
        dataset_checksum: truth.meta.as_ref().map(|m| m.dataset_checksum.clone()),
        recall,
    };
    emit_json(out, &rep)
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => {
            let mut outputs = Outputs::new();
            outputs.write_json(path, value)?;
            outputs.commit();
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn stats(cfg: &RunConfig, clusters: &Path, csv: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (cs, meta) = load_clusters(clusters).map_err(|e| match e {
        protclust::error::Error::Io(io) => CliError::file(clusters, io),
        e => e.into(),
    })?;
    let stats = cluster_stats(&cs);
    if let Some(path) = csv {
        let mut outputs = Outputs::new();
        outputs.write(path, |w| Ok(stats.write_histogram_csv(w)?))?;
        outputs.commit();
    }
    let rep = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.mode,
        "config": cfg,
        "dataset_checksum": meta.map(|m| m.dataset_checksum),
        "stats": stats,
    });
    emit_json(out, &rep)
}

pub fn gen(planted: &PlantedConfig, out: &Path) -> Result<()> {
    let store = planted_families(planted)?;
    let mut outputs = Outputs::new();
    outputs.write(out, |w| Ok(store.write_fasta(w)?))?;
    outputs.commit();
    Ok(())
}
