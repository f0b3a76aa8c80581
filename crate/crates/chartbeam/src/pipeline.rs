// SPDX-License-Identifier: Apache-2.0

//! Experiment stages: generate, chart, train, evaluate.
//!
//! Each stage reads its inputs from and writes its outputs to the
//! configured output directory:
//!
//! ```text
//! <out>/<id>.cbds                                     dataset
//! <out>/<id>.cbch                                     chart
//! <out>/checkpoints/<id>_bs<b>_<backend>_<task>.cbnn  network
//! <out>/checkpoints/<id>_bs<b>_<backend>_<task>_loss.csv
//! <out>/reports/...                                   report bundle
//! ```
//!
//! BS indices are 1-based here and in file names. Stages are deterministic;
//! rayon parallelism is used only where the output order is fixed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chartbeam_core::channel::{Dataset, Split};
use chartbeam_core::chart::{chart_quality, unit_distance, Chart, ChartDiagnostics};
use chartbeam_core::codebook::{precoder_correlation, BeamRanking, Codebook};
use chartbeam_core::linalg::normalized;
use chartbeam_core::metrics::{correlation_cdf, mean, overhead_report, top_k_accuracy};
use chartbeam_core::neural::{init_network, train, InputScaling, Network, Target, Trained};
use chartbeam_core::predict::{BeamPredictor, NearestNeighbor, PrecoderPredictor};
use chartbeam_core::{Error as CoreError, C32, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NetBackend, Task};
use crate::error::{PipelineError, Result};
use crate::format::{self, ChartFile};
use crate::report;
use crate::timing::{time_inference, TimingStats};

/// Where each artifact of one experiment lives.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
    pub id: String,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self { root: cfg.output_dir.clone(), id: cfg.dataset_id.clone() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join(format!("{}.cbds", self.id))
    }

    pub fn chart(&self) -> PathBuf {
        self.root.join(format!("{}.cbch", self.id))
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    fn run_name(&self, bs: usize, backend: NetBackend, task: Task) -> String {
        format!("{}_bs{bs}_{}_{}", self.id, backend.name(), task.name())
    }

    pub fn checkpoint(&self, bs: usize, backend: NetBackend, task: Task) -> PathBuf {
        self.checkpoints().join(format!("{}.cbnn", self.run_name(bs, backend, task)))
    }

    pub fn loss_curve(&self, bs: usize, backend: NetBackend, task: Task) -> PathBuf {
        self.checkpoints().join(format!("{}_loss.csv", self.run_name(bs, backend, task)))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(PipelineError::io(path))
}

fn format_err(path: &Path) -> impl FnOnce(format::FormatError) -> PipelineError + '_ {
    move |source| PipelineError::Format { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerateSummary {
    pub n_ue: usize,
    pub n_calibration: usize,
    pub n_test: usize,
    pub n_bs: usize,
    /// Ambient dimension `D = N_a * N_s` of the uplink channel.
    pub ambient_dim: usize,
    pub n_beams: usize,
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UEs {} ({} calibration, {} test), BSs {}, D = {}, N_b = {}",
            self.n_ue, self.n_calibration, self.n_test, self.n_bs, self.ambient_dim, self.n_beams
        )
    }
}

pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(chartbeam_core::channel::build_dataset(
        &cfg.scene_config(),
        &cfg.array_config(),
        &cfg.uplink_carrier(),
        &cfg.downlink_carrier(),
        cfg.scene.calibration_fraction,
    )?)
}

pub fn generate_summary(cfg: &ExperimentConfig, ds: &Dataset) -> GenerateSummary {
    GenerateSummary {
        n_ue: ds.samples.len(),
        n_calibration: ds.indices(Split::Calibration).len(),
        n_test: ds.indices(Split::Test).len(),
        n_bs: ds.n_bs(),
        ambient_dim: ds.ambient_dim(),
        n_beams: cfg.n_beams(),
    }
}

/// Build the dataset and write it as `CBDS`.
pub fn run_generate(cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    let layout = Layout::new(cfg);
    create_dir(&layout.root)?;
    let ds = generate_dataset(cfg)?;
    let path = layout.dataset();
    format::save_dataset(&ds, &path).map_err(format_err(&path))?;
    Ok(generate_summary(cfg, &ds))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = Layout::new(cfg).dataset();
    let ds = format::load_dataset(&path).map_err(format_err(&path))?;
    if ds.n_bs() != cfg.n_bs() || ds.array.n_v != cfg.array.n_v || ds.array.n_h != cfg.array.n_h {
        return Err(PipelineError::Validation(format!(
            "{} does not match the configured scene or array",
            path.display()
        )));
    }
    Ok(ds)
}

// ------------------------------------------------------------------- chart

/// The calibration uplink channels at BS1 with their dataset indices. This is
/// everything charting is allowed to see.
pub fn calibration_uplinks(ds: &Dataset) -> (Vec<usize>, Vec<Vec<C32>>) {
    let idx = ds.indices(Split::Calibration);
    let channels = idx.iter().map(|&i| ds.samples[i].uplink.data.clone()).collect();
    (idx, channels)
}

fn widen(h: &[C32]) -> Vec<C64> {
    h.iter().map(|z| C64::new(z.re.into(), z.im.into())).collect()
}

/// [`chartbeam_core::chart::pairwise_distances`] computed row-parallel; bit-identical to the
/// sequential version.
pub fn pairwise_distances_parallel(units: &[Vec<C64>]) -> Vec<f64> {
    let n = units.len();
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (i + 1..n).map(|j| unit_distance(&units[i], &units[j])).collect()).collect();
    let mut out = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (k, d) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Chart the calibration uplink channels.
pub fn build_chart(cfg: &ExperimentConfig, sample_indices: Vec<usize>, channels: Vec<Vec<C32>>) -> Result<(ChartFile, ChartDiagnostics)> {
    let units = channels
        .par_iter()
        .map(|h| normalized(&widen(h)).ok_or(CoreError::ZeroNorm("calibration channel")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let dist = pairwise_distances_parallel(&units);
    let (chart, diag) = Chart::build_with_distances(channels, units, &dist, cfg.chart_params())?;
    Ok((ChartFile { chart, sample_indices }, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartSummary {
    pub n_calibration: usize,
    pub neighborhood_fraction: f64,
    pub trustworthiness: f64,
    pub continuity: f64,
    pub kruskal_stress: f64,
    /// Mean distance between the embedding of each calibration channel and
    /// its stored pseudo-location.
    pub self_embedding_error: f64,
}

impl fmt::Display for ChartSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N_cal {}, TW {:.4}, CT {:.4}, KS {:.4} at {:.0}% neighborhoods, self-embedding error {:.3e}",
            self.n_calibration,
            self.trustworthiness,
            self.continuity,
            self.kruskal_stress,
            100.0 * self.neighborhood_fraction,
            self.self_embedding_error
        )
    }
}

fn ground(p: &[f64; 3]) -> [f64; 2] {
    [p[0], p[1]]
}

/// Chart quality against the calibration UEs' ground positions.
pub fn chart_summary(cfg: &ExperimentConfig, ds: &Dataset, file: &ChartFile) -> Result<ChartSummary> {
    let chart = &file.chart;
    let truth: Vec<[f64; 2]> = file.sample_indices.iter().map(|&i| ground(&ds.samples[i].position)).collect();
    let q = chart_quality(&truth, &chart.cal_embedding, cfg.evaluate.neighborhood_fraction)?;
    let errors = chart
        .cal_channels
        .par_iter()
        .zip(&chart.cal_embedding)
        .map(|(h, z)| {
            let e = chart.embed_c32(h)?;
            Ok(e.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        })
        .collect::<std::result::Result<Vec<f64>, CoreError>>()?;
    Ok(ChartSummary {
        n_calibration: chart.n_calibration(),
        neighborhood_fraction: q.neighborhood_fraction,
        trustworthiness: q.trustworthiness,
        continuity: q.continuity,
        kruskal_stress: q.kruskal_stress,
        self_embedding_error: mean(&errors),
    })
}

/// Chart the dataset and write `CBCH`.
pub fn run_chart(cfg: &ExperimentConfig) -> Result<(ChartSummary, ChartDiagnostics)> {
    let ds = load_dataset(cfg)?;
    let (idx, channels) = calibration_uplinks(&ds);
    let (file, diag) = build_chart(cfg, idx, channels)?;
    let path = Layout::new(cfg).chart();
    format::save_chart(&file, &path).map_err(format_err(&path))?;
    Ok((chart_summary(cfg, &ds, &file)?, diag))
}

/// Load the chart and check it belongs to `ds`.
pub fn load_chart(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ChartFile> {
    let path = Layout::new(cfg).chart();
    let file = format::load_chart(&path).map_err(format_err(&path))?;
    let compatible = file.chart.ambient_dim() == ds.ambient_dim()
        && file.chart.dim() == cfg.chart.target_dim
        && file.sample_indices.iter().all(|&i| i < ds.samples.len() && ds.split[i] == Split::Calibration);
    if !compatible {
        return Err(PipelineError::Validation(format!("{} does not match the dataset", path.display())));
    }
    Ok(file)
}

// ------------------------------------------------------------------- train

/// Beam rankings of the downlink channel at `bs` (1-based) for each sample.
pub fn beam_rankings(cb: &Codebook, ds: &Dataset, samples: &[usize], bs: usize) -> Result<Vec<BeamRanking>> {
    Ok(samples
        .par_iter()
        .map(|&i| cb.rank_beams(&ds.samples[i].downlink[bs - 1].subcarriers_c64()))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Downlink channel at the central subcarrier.
pub fn central_channel(ds: &Dataset, sample: usize, bs: usize) -> Vec<C64> {
    ds.samples[sample].downlink[bs - 1].subcarrier_c64(ds.downlink_carrier.central_subcarrier())
}

/// Inputs are the stored calibration pseudo-locations; targets are the best
/// beam (classification) or the central downlink channel (regression).
pub fn training_set(cfg: &ExperimentConfig, ds: &Dataset, file: &ChartFile, bs: usize, task: Task) -> Result<(Vec<Vec<f64>>, Vec<Target>)> {
    cfg.check_bs(bs)?;
    let inputs = file.chart.cal_embedding.clone();
    let targets = match task {
        Task::Classification => beam_rankings(&cfg.codebook()?, ds, &file.sample_indices, bs)?
            .iter()
            .map(|r| Target::Beam(r.best()))
            .collect(),
        Task::Regression => file.sample_indices.iter().map(|&i| Target::Channel(central_channel(ds, i, bs))).collect(),
    };
    Ok((inputs, targets))
}

pub fn train_backend(cfg: &ExperimentConfig, ds: &Dataset, file: &ChartFile, bs: usize, backend: NetBackend, task: Task) -> Result<Trained> {
    let (inputs, targets) = training_set(cfg, ds, file, bs, task)?;
    let head = match task {
        Task::Classification => chartbeam_core::neural::HeadKind::Classification,
        Task::Regression => chartbeam_core::neural::HeadKind::Regression,
    };
    let run = format!("bs{bs}/{}/{}", backend.name(), task.name());
    let net = init_network(
        backend.input_kind(),
        head,
        cfg.network_dims(backend, task),
        cfg.network.rff.sigma,
        cfg.stage_seed(&format!("init/{run}")),
    )?
    .with_scaling(InputScaling::fit(&inputs));
    Ok(train(net, &inputs, &targets, &cfg.train_config(cfg.stage_seed(&format!("train/{run}"))))?)
}

fn write_loss_curve(path: &Path, history: &[f64]) -> Result<()> {
    let err = |e: csv::Error| PipelineError::Report(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["epoch", "loss"]).map_err(err)?;
    for (e, l) in history.iter().enumerate() {
        w.write_record([(e + 1).to_string(), l.to_string()]).map_err(err)?;
    }
    w.flush().map_err(PipelineError::io(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub bs: usize,
    pub backend: NetBackend,
    pub task: Task,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub checkpoint: PathBuf,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BS{} {} {}: loss {:.4} -> {:.4}",
            self.bs,
            self.backend.name(),
            self.task.name(),
            self.initial_loss,
            self.final_loss
        )
    }
}

/// Train the selected runs (all when `None`), writing a checkpoint and a
/// loss curve per run. A diverging run still writes its partial loss curve.
pub fn run_train(cfg: &ExperimentConfig, backend: Option<NetBackend>, bs: Option<usize>, task: Option<Task>) -> Result<Vec<TrainSummary>> {
    if let Some(b) = bs {
        cfg.check_bs(b)?;
    }
    let ds = load_dataset(cfg)?;
    let file = load_chart(cfg, &ds)?;
    let layout = Layout::new(cfg);
    create_dir(&layout.checkpoints())?;
    let mut jobs = Vec::new();
    for b in bs.map_or_else(|| (1..=cfg.n_bs()).collect(), |b| vec![b]) {
        for n in backend.map_or(NetBackend::ALL.to_vec(), |n| vec![n]) {
            for t in task.map_or(Task::ALL.to_vec(), |t| vec![t]) {
                jobs.push((b, n, t));
            }
        }
    }
    jobs.par_iter()
        .map(|&(b, n, t)| {
            let loss_path = layout.loss_curve(b, n, t);
            let trained = match train_backend(cfg, &ds, &file, b, n, t) {
                Ok(tr) => tr,
                Err(PipelineError::Core(CoreError::Diverged { epoch, history })) => {
                    write_loss_curve(&loss_path, &history)?;
                    return Err(PipelineError::Core(CoreError::Diverged { epoch, history }));
                }
                Err(e) => return Err(e),
            };
            write_loss_curve(&loss_path, &trained.history)?;
            let path = layout.checkpoint(b, n, t);
            format::save_network(&trained.network, &path).map_err(format_err(&path))?;
            Ok(TrainSummary {
                bs: b,
                backend: n,
                task: t,
                initial_loss: trained.history[0],
                final_loss: *trained.history.last().expect("at least one epoch"),
                checkpoint: path,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- evaluate

/// Trained networks keyed by (BS, backend, task).
pub type Networks = BTreeMap<(usize, NetBackend, Task), Network>;

/// Load every checkpoint evaluation needs.
pub fn load_networks(cfg: &ExperimentConfig) -> Result<Networks> {
    let layout = Layout::new(cfg);
    let mut out = Networks::new();
    for bs in 1..=cfg.n_bs() {
        for backend in NetBackend::ALL {
            for task in Task::ALL {
                let path = layout.checkpoint(bs, backend, task);
                if !path.exists() {
                    return Err(PipelineError::MissingCheckpoint { backend: backend.name().into(), bs, path });
                }
                out.insert((bs, backend, task), format::load_network(&path).map_err(format_err(&path))?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub backend: String,
    pub top1: f64,
    pub top3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub backend: String,
    pub mean_eta: f64,
    /// Correlation of every test UE, in test order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsReport {
    pub bs: usize,
    /// Rows rff, mlp, nn1, oracle.
    pub accuracy: Vec<AccuracyRow>,
    /// Rows rff-regression, mlp-regression, rff-classifier, mlp-classifier,
    /// nn1, oracle.
    pub correlation: Vec<CorrelationRow>,
}

impl BsReport {
    pub fn accuracy(&self, backend: &str) -> Option<&AccuracyRow> {
        self.accuracy.iter().find(|r| r.backend == backend)
    }

    pub fn correlation(&self, backend: &str) -> Option<&CorrelationRow> {
        self.correlation.iter().find(|r| r.backend == backend)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverheadSummary {
    pub n_bs: usize,
    pub ambient_dim: usize,
    pub chart_dim: usize,
    pub sweeping_cost: usize,
    pub proposed_cost: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub bs: usize,
    pub backend: String,
    pub mean_ns: f64,
    pub std_ns: f64,
    pub repetitions: usize,
    pub queries: usize,
}

impl TimingRow {
    fn new(bs: usize, backend: &str, s: TimingStats) -> Self {
        Self { bs, backend: backend.into(), mean_ns: s.mean_ns, std_ns: s.std_ns, repetitions: s.repetitions, queries: s.queries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub n_test: usize,
    pub chart: ChartSummary,
    pub overhead: OverheadSummary,
    pub bs: Vec<BsReport>,
    /// Ground positions of the test UEs.
    #[serde(skip)]
    pub positions: Vec<[f64; 2]>,
    /// Present only when timing is enabled.
    #[serde(skip)]
    pub timing: Option<Vec<TimingRow>>,
}

fn accuracy_row(name: &str, predicted: &[usize], rankings: &[BeamRanking]) -> Result<AccuracyRow> {
    Ok(AccuracyRow {
        backend: name.into(),
        top1: top_k_accuracy(predicted, rankings, 1)?,
        top3: top_k_accuracy(predicted, rankings, 3)?,
    })
}

fn correlation_row(name: &str, samples: Vec<f64>) -> CorrelationRow {
    CorrelationRow { backend: name.into(), mean_eta: mean(&samples), samples }
}

fn predict_all<T: Send>(queries: &[Vec<f64>], f: impl Fn(&[f64]) -> chartbeam_core::Result<T> + Sync) -> Result<Vec<T>> {
    Ok(queries.par_iter().map(|z| f(z)).collect::<std::result::Result<Vec<_>, _>>()?)
}

fn correlations(channels: &[Vec<C64>], precoders: &[Vec<C64>]) -> Result<Vec<f64>> {
    Ok(channels
        .par_iter()
        .zip(precoders)
        .map(|(g, w)| precoder_correlation(w, g))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

fn network(nets: &Networks, bs: usize, backend: NetBackend, task: Task) -> Result<Network> {
    nets.get(&(bs, backend, task)).cloned().ok_or_else(|| PipelineError::MissingCheckpoint {
        backend: backend.name().into(),
        bs,
        path: PathBuf::from(format!("{}_{}", backend.name(), task.name())),
    })
}

/// Evaluate every backend at every BS on the test split.
pub fn evaluate(cfg: &ExperimentConfig, ds: &Dataset, file: &ChartFile, nets: &Networks) -> Result<EvalReport> {
    let test = ds.indices(Split::Test);
    if test.is_empty() {
        return Err(PipelineError::Validation("test split is empty".into()));
    }
    let chart = &file.chart;
    let cb = cfg.codebook()?;
    let queries: Vec<Vec<f64>> = test
        .par_iter()
        .map(|&i| chart.embed_c32(&ds.samples[i].uplink.data))
        .collect::<std::result::Result<_, _>>()?;
    let refs = chart.cal_embedding.clone();
    let reps = cfg.evaluate.timing_repetitions;
    let mut timing = (reps > 0).then(Vec::new);

    let mut per_bs = Vec::with_capacity(cfg.n_bs());
    for bs in 1..=cfg.n_bs() {
        let rankings = beam_rankings(&cb, ds, &test, bs)?;
        let cal_labels: Vec<usize> = beam_rankings(&cb, ds, &file.sample_indices, bs)?.iter().map(|r| r.best()).collect();
        let rff = BeamPredictor::network(network(nets, bs, NetBackend::Rff, Task::Classification)?)?;
        let mlp = BeamPredictor::network(network(nets, bs, NetBackend::Mlp, Task::Classification)?)?;
        let nn1 = BeamPredictor::nearest_neighbor(refs.clone(), cal_labels, true)?;

        let beams_rff = predict_all(&queries, |z| rff.predict_beam(z))?;
        let beams_mlp = predict_all(&queries, |z| mlp.predict_beam(z))?;
        let beams_nn1 = predict_all(&queries, |z| nn1.predict_beam(z))?;
        let oracle: Vec<usize> = rankings.iter().map(BeamRanking::best).collect();
        let accuracy = vec![
            accuracy_row("rff", &beams_rff, &rankings)?,
            accuracy_row("mlp", &beams_mlp, &rankings)?,
            accuracy_row("nn1", &beams_nn1, &rankings)?,
            accuracy_row("oracle", &oracle, &rankings)?,
        ];

        let channels: Vec<Vec<C64>> = test.iter().map(|&i| central_channel(ds, i, bs)).collect();
        let cal_channels: Vec<Vec<C64>> = file.sample_indices.iter().map(|&i| central_channel(ds, i, bs)).collect();
        let reg_rff = PrecoderPredictor::network(network(nets, bs, NetBackend::Rff, Task::Regression)?)?;
        let reg_mlp = PrecoderPredictor::network(network(nets, bs, NetBackend::Mlp, Task::Regression)?)?;
        let reg_nn1 = PrecoderPredictor::nearest_neighbor(refs.clone(), &cal_channels, true)?;
        let beam_precoders = |beams: &[usize]| beams.iter().map(|&b| cb.beam(b).to_vec()).collect::<Vec<_>>();
        // best codebook beam for the central-subcarrier channel alone
        let oracle_eta = channels
            .par_iter()
            .map(|g| Ok(cb.rank_beams(std::slice::from_ref(g))?.scores[0].min(1.0)))
            .collect::<Result<Vec<f64>>>()?;
        let correlation = vec![
            correlation_row("rff-regression", correlations(&channels, &predict_all(&queries, |z| reg_rff.predict_precoder(z))?)?),
            correlation_row("mlp-regression", correlations(&channels, &predict_all(&queries, |z| reg_mlp.predict_precoder(z))?)?),
            correlation_row("rff-classifier", correlations(&channels, &beam_precoders(&beams_rff))?),
            correlation_row("mlp-classifier", correlations(&channels, &beam_precoders(&beams_mlp))?),
            correlation_row("nn1", correlations(&channels, &predict_all(&queries, |z| reg_nn1.predict_precoder(z))?)?),
            correlation_row("oracle", oracle_eta),
        ];

        if let Some(rows) = timing.as_mut() {
            let brute = NearestNeighbor::new(refs.clone(), false)?;
            rows.push(TimingRow::new(bs, "rff", time_inference(|z: &Vec<f64>| rff.predict_beam(z), &queries, reps)?));
            rows.push(TimingRow::new(bs, "mlp", time_inference(|z: &Vec<f64>| mlp.predict_beam(z), &queries, reps)?));
            rows.push(TimingRow::new(bs, "nn1", time_inference(|z: &Vec<f64>| nn1.predict_beam(z), &queries, reps)?));
            rows.push(TimingRow::new(bs, "nn1-brute", time_inference(|z: &Vec<f64>| brute.nearest_linear(z), &queries, reps)?));
        }
        per_bs.push(BsReport { bs, accuracy, correlation });
    }

    let o = overhead_report(cfg.n_bs(), ds.ambient_dim(), chart.dim());
    Ok(EvalReport {
        dataset_id: cfg.dataset_id.clone(),
        n_test: test.len(),
        chart: chart_summary(cfg, ds, file)?,
        overhead: OverheadSummary {
            n_bs: cfg.n_bs(),
            ambient_dim: ds.ambient_dim(),
            chart_dim: chart.dim(),
            sweeping_cost: o.sweeping_cost,
            proposed_cost: o.proposed_cost,
        },
        bs: per_bs,
        positions: test.iter().map(|&i| ground(&ds.samples[i].position)).collect(),
        timing,
    })
}

#[derive(Serialize)]
struct TimingFile<'a> {
    timing: &'a [TimingRow],
}

/// Write the report bundle into `dir` and lint every CDF file. Returns the
/// written paths in a fixed order.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let id = &report.dataset_id;
    let mut written = Vec::new();
    let summary = dir.join(format!("{id}_summary.toml"));
    report::write_toml(&summary, report)?;
    written.push(summary);
    for b in &report.bs {
        let mut cdfs = Vec::with_capacity(b.correlation.len());
        for row in &b.correlation {
            let stem = format!("{id}_bs{}_{}", b.bs, row.backend);
            let cdf = correlation_cdf(&row.samples)?;
            let path = dir.join(format!("{stem}_cdf.csv"));
            report::write_cdf_csv(&path, &cdf)?;
            report::check_cdf_csv(&path)?;
            written.push(path);
            let title = format!("BS{} correlation, {}", b.bs, row.backend);
            let path = dir.join(format!("{stem}_map.csv"));
            report::write_map_csv(&path, &report.positions, &row.samples)?;
            written.push(path);
            let path = dir.join(format!("{stem}_map.svg"));
            report::write_map_svg(&path, &title, &report.positions, &row.samples)?;
            written.push(path);
            cdfs.push((row.backend.as_str(), cdf));
        }
        let path = dir.join(format!("{id}_bs{}_cdf.svg", b.bs));
        let series: Vec<(&str, &[(f64, f64)])> = cdfs.iter().map(|(n, c)| (*n, c.as_slice())).collect();
        report::write_cdf_svg(&path, &format!("BS{} correlation CDF", b.bs), &series)?;
        written.push(path);
    }
    if let Some(rows) = &report.timing {
        let path = dir.join(format!("{id}_timing.toml"));
        report::write_toml(&path, &TimingFile { timing: rows })?;
        written.push(path);
    }
    Ok(written)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "chart: {}", self.chart)?;
        writeln!(f, "overhead: sweeping {} vs proposed {} coefficients", self.overhead.sweeping_cost, self.overhead.proposed_cost)?;
        for b in &self.bs {
            writeln!(f, "BS{} top-k accuracy ({} test UEs)", b.bs, self.n_test)?;
            for r in &b.accuracy {
                writeln!(f, "  {:<8} top1 {:.4}  top3 {:.4}", r.backend, r.top1, r.top3)?;
            }
            writeln!(f, "BS{} mean correlation", b.bs)?;
            for r in &b.correlation {
                writeln!(f, "  {:<16} {:.4}", r.backend, r.mean_eta)?;
            }
        }
        if let Some(rows) = &self.timing {
            writeln!(f, "inference time per query")?;
            for r in rows {
                writeln!(f, "  BS{} {:<10} {:.0} ns (sd {:.0})", r.bs, r.backend, r.mean_ns, r.std_ns)?;
            }
        }
        Ok(())
    }
}

/// Evaluate from the files on disk and write the report bundle.
pub fn run_evaluate(cfg: &ExperimentConfig) -> Result<(EvalReport, Vec<PathBuf>)> {
    let ds = load_dataset(cfg)?;
    let file = load_chart(cfg, &ds)?;
    let nets = load_networks(cfg)?;
    let report = evaluate(cfg, &ds, &file, &nets)?;
    let written = write_report(&report, &Layout::new(cfg).reports())?;
    Ok((report, written))
}

/// Every stage in order, reporting progress through `log`.
pub fn run_all(cfg: &ExperimentConfig, mut log: impl FnMut(String)) -> Result<(EvalReport, Vec<PathBuf>)> {
    log(format!("generate: {}", run_generate(cfg)?));
    let (summary, diag) = run_chart(cfg)?;
    log(format!("chart: {summary}, repaired edges {}", diag.repaired_edges));
    for t in run_train(cfg, None, None, None)? {
        log(format!("train: {t}"));
    }
    run_evaluate(cfg)
}
