use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{centralized_step, distributed_step, CentralizedState, DistributedState};

use super::config::ScenarioConfig;
use super::metrics::{ospa, ospa2_windowed, TrackHistory};
use super::scenario::{generate_measurements, generate_truth, sensor_trajectories};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Centralized,
    Distributed,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "centralized" => Ok(Method::Centralized),
            "distributed" => Ok(Method::Distributed),
            other => Err(format!("unknown method {other:?}, expected centralized or distributed")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Centralized => "centralized",
            Method::Distributed => "distributed",
        })
    }
}

/// Seed of Monte-Carlo run `run`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One truth or estimate position. Truth rows have no node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub run: usize,
    pub step: usize,
    pub kind: String,
    pub node: Option<usize>,
    pub id: String,
    pub x: f64,
    pub y: f64,
}

pub const TRUTH: &str = "truth";
pub const ESTIMATE: &str = "estimate";

/// Per-step averages over runs (and over nodes for the distributed scheme).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub ospa_mean: f64,
    pub ospa2_mean: f64,
    pub card_true_mean: f64,
    pub card_est_mean: f64,
}

/// Parameters needed to turn track rows into metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    pub steps: usize,
    pub nodes: usize,
    pub c: f64,
    pub p: f64,
    pub window: usize,
}

impl MetricParams {
    pub fn new(cfg: &ScenarioConfig, nodes: usize) -> Self {
        Self {
            steps: cfg.steps,
            nodes,
            c: cfg.ospa_c,
            p: cfg.ospa_p,
            window: cfg.ospa2_window,
        }
    }

    fn to_text(self) -> String {
        format!(
            "steps = {}\nnodes = {}\nospa_c = {}\nospa_p = {}\nospa2_window = {}\n",
            self.steps, self.nodes, self.c, self.p, self.window
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected `key = value`".into(),
            })?;
            kv.insert(k.trim().to_string(), (lineno + 1, v.trim().to_string()));
        }
        fn get<T: FromStr>(kv: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T> {
            let (line, v) = kv.get(key).ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing {key}"),
            })?;
            v.parse().map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value for {key}: {v:?}"),
            })
        }
        Ok(Self {
            steps: get(&kv, "steps")?,
            nodes: get(&kv, "nodes")?,
            c: get(&kv, "ospa_c")?,
            p: get(&kv, "ospa_p")?,
            window: get(&kv, "ospa2_window")?,
        })
    }
}

/// Outcome of a single Monte-Carlo run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub nodes: usize,
    pub rows: Vec<TrackRow>,
    pub metrics: Vec<StepSummary>,
}

fn rows_for(run: usize, step: usize, kind: &str, node: Option<usize>, items: impl Iterator<Item = (String, f64, f64)>) -> Vec<TrackRow> {
    items
        .map(|(id, x, y)| TrackRow {
            run,
            step,
            kind: kind.to_string(),
            node,
            id,
            x,
            y,
        })
        .collect()
}

/// Simulates one run. The data depend only on the seed and the scenario, so
/// both methods see identical truth and measurements for the same run.
pub fn run_single(cfg: &ScenarioConfig, method: Method, run: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, run));
    let truth = generate_truth(cfg, &mut rng)?;
    let trajectories = sensor_trajectories(cfg, &mut rng);
    let n = trajectories.first().map_or(0, Vec::len);
    let graph = match method {
        Method::Distributed => Some(cfg.graph(n)?),
        Method::Centralized => None,
    };
    let consensus = cfg.consensus();
    let mut central = CentralizedState::new(n);
    let mut dist = DistributedState::new(n);
    let mut rows = Vec::new();
    for k in 1..=cfg.steps {
        let positions = &trajectories[k - 1];
        let frames = generate_measurements(cfg, &truth, positions, k, &mut rng);
        let model = cfg.network_model(positions)?;
        rows.extend(rows_for(
            run,
            k,
            TRUTH,
            None,
            truth.alive_at(k).into_iter().map(|(id, x)| (id.to_string(), x[0], x[1])),
        ));
        let node_estimates = match &graph {
            None => {
                central = centralized_step(&central, &frames, &model)?;
                vec![central.estimates()]
            }
            Some(g) => {
                dist = distributed_step(&dist, &frames, &model, g, &consensus)?;
                dist.nodes.iter().map(|s| s.density.map_estimate()).collect()
            }
        };
        for (node, est) in node_estimates.into_iter().enumerate() {
            rows.extend(rows_for(
                run,
                k,
                ESTIMATE,
                Some(node),
                est.into_iter().map(|(l, x)| (format!("{}:{}", l.birth_time, l.index), x[0], x[1])),
            ));
        }
    }
    let nodes = graph.as_ref().map_or(1, |g| g.node_count());
    let metrics = run_metrics(&rows, MetricParams::new(cfg, nodes))?;
    Ok(RunOutput { nodes, rows, metrics })
}

/// Per-step metrics of one run's rows.
pub fn run_metrics(rows: &[TrackRow], params: MetricParams) -> Result<Vec<StepSummary>> {
    let mut truth: TrackHistory<String> = BTreeMap::new();
    let mut est: Vec<TrackHistory<String>> = vec![BTreeMap::new(); params.nodes];
    for r in rows {
        let p = Vector2::new(r.x, r.y);
        match (r.kind.as_str(), r.node) {
            (TRUTH, _) => {
                truth.entry(r.step).or_default().insert(r.id.clone(), p);
            }
            (ESTIMATE, Some(node)) if node < params.nodes => {
                est[node].entry(r.step).or_default().insert(r.id.clone(), p);
            }
            _ => {
                return Err(Error::Argument(format!(
                    "row kind {:?} at node {:?} does not fit {} nodes",
                    r.kind, r.node, params.nodes
                )))
            }
        }
    }
    let empty = BTreeMap::new();
    let points = |m: Option<&BTreeMap<String, Vector2<f64>>>| -> Vec<Vector2<f64>> {
        m.unwrap_or(&empty).values().copied().collect()
    };
    let nodes = params.nodes as f64;
    (1..=params.steps)
        .map(|k| {
            let tru = points(truth.get(&k));
            let mut o = 0.0;
            let mut o2 = 0.0;
            let mut card = 0.0;
            for e in &est {
                let pts = points(e.get(&k));
                o += ospa(&pts, &tru, params.c, params.p)?;
                o2 += ospa2_windowed(e, &truth, k, params.window, params.c, params.p)?;
                card += pts.len() as f64;
            }
            Ok(StepSummary {
                step: k,
                ospa_mean: o / nodes,
                ospa2_mean: o2 / nodes,
                card_true_mean: tru.len() as f64,
                card_est_mean: card / nodes,
            })
        })
        .collect()
}

/// Averages per-run metrics step by step.
pub fn average(runs: &[Vec<StepSummary>]) -> Vec<StepSummary> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len() as f64;
    (0..first.len())
        .map(|i| {
            let mean = |f: fn(&StepSummary) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n;
            StepSummary {
                step: first[i].step,
                ospa_mean: mean(|s| s.ospa_mean),
                ospa2_mean: mean(|s| s.ospa2_mean),
                card_true_mean: mean(|s| s.card_true_mean),
                card_est_mean: mean(|s| s.card_est_mean),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MonteCarlo {
    pub method: Method,
    pub params: MetricParams,
    pub runs: Vec<RunOutput>,
    pub summary: Vec<StepSummary>,
}

/// Runs `cfg.mc_runs` independent runs in parallel. Results are collected
/// in run order, so the output does not depend on the thread count.
pub fn monte_carlo(cfg: &ScenarioConfig, method: Method) -> Result<MonteCarlo> {
    cfg.validate()?;
    let runs: Vec<RunOutput> = (0..cfg.mc_runs)
        .into_par_iter()
        .map(|r| run_single(cfg, method, r))
        .collect::<Result<_>>()?;
    let per_run: Vec<Vec<StepSummary>> = runs.iter().map(|r| r.metrics.clone()).collect();
    let nodes = runs.first().map_or(1, |r| r.nodes);
    Ok(MonteCarlo {
        method,
        params: MetricParams::new(cfg, nodes),
        summary: average(&per_run),
        runs,
    })
}

/// File stem of a result set, e.g. `case_a_centralized`.
pub fn output_stem(cfg: &ScenarioConfig, method: Method) -> String {
    format!("case_{}_{}", cfg.case.to_string().to_lowercase(), method)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `<stem>.csv` (summary), `<stem>_tracks.csv` and `<stem>_meta.txt`
/// into `dir`, returning the summary path.
pub fn write_outputs(dir: &Path, stem: &str, mc: &MonteCarlo) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let summary = dir.join(format!("{stem}.csv"));
    write_csv(&summary, &mc.summary)?;
    let rows: Vec<&TrackRow> = mc.runs.iter().flat_map(|r| &r.rows).collect();
    write_csv(&dir.join(format!("{stem}_tracks.csv")), &rows)?;
    fs::write(dir.join(format!("{stem}_meta.txt")), mc.params.to_text())?;
    Ok(summary)
}

pub fn read_summary(path: &Path) -> Result<Vec<StepSummary>> {
    read_csv(path)
}

/// Recomputes the summary of every result set in `dir` from its stored
/// truth and estimates. Returns `(stem, summary)` pairs sorted by stem.
pub fn recompute_dir(dir: &Path) -> Result<Vec<(String, Vec<StepSummary>)>> {
    let mut stems: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix("_meta.txt")).map(String::from))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Error::Argument(format!("no result sets in {}", dir.display())));
    }
    stems
        .into_iter()
        .map(|stem| {
            let params = MetricParams::parse(&fs::read_to_string(dir.join(format!("{stem}_meta.txt")))?)?;
            let rows: Vec<TrackRow> = read_csv(&dir.join(format!("{stem}_tracks.csv")))?;
            let mut by_run: BTreeMap<usize, Vec<TrackRow>> = BTreeMap::new();
            for r in rows {
                by_run.entry(r.run).or_default().push(r);
            }
            let per_run = by_run
                .values()
                .map(|rows| run_metrics(rows, params))
                .collect::<Result<Vec<_>>>()?;
            Ok((stem, average(&per_run)))
        })
        .collect()
}
