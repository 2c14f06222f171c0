//! Experiment orchestration: dataset generation with a PD loop, per-joint
//! hyperparameter search and training, held-out evaluation, closed-loop
//! tracking runs with reporting, and dynamics-component dumps against ground
//! truth. Everything is file-based and deterministic for fixed seeds.

use crate::control::{
    ExactFlController, Gains, GpFlController, GpFlDceController, PdController,
};
use crate::dyncomp::{estimate_bias, estimate_gravity, estimate_inertia};
use crate::dynamics::{bias_forces, gravity_vector, mass_matrix, JointState, RobotModel};
use crate::error::{Error, Result};
use crate::gpr::{
    nmse, optimize_hyperparameters, Dataset, GpModel, KernelSpec, OptimizeOptions, TorqueModel,
};
use crate::sim::{
    filtered_noise_reference, growing_sine_reference, sample_sine_frequencies, simulate,
    Controller, Integrator, Reference, SimConfig, TrajectoryLog,
};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Filtered-noise reference amplitude that excites the desk arm to roughly
/// 0.6 rad of joint motion under the stock PD loop.
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 0.6;
pub const DEFAULT_NOISE_CUTOFF_HZ: f64 = 1.0;
/// Hand-tuned data-collection PD gains for the desk arm.
pub const DEFAULT_PD_KP: f64 = 200.0;
pub const DEFAULT_PD_KD: f64 = 20.0;

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_duration() -> f64 {
    50.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_downsample() -> usize {
    10
}
fn default_search_subsample() -> usize {
    1000
}
fn default_max_iterations() -> usize {
    60
}
fn default_restarts() -> usize {
    4
}
fn default_amplitude() -> f64 {
    DEFAULT_NOISE_AMPLITUDE
}
fn default_cutoff() -> f64 {
    DEFAULT_NOISE_CUTOFF_HZ
}
fn default_pd_kp() -> f64 {
    DEFAULT_PD_KP
}
fn default_pd_kd() -> f64 {
    DEFAULT_PD_KD
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Se,
    Gip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Pd,
    ExactFl,
    GpFl,
    GpFlDce,
}

/// Closed-loop pole placement for the linearizing controllers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GainSpec {
    pub omega: f64,
    pub zeta: f64,
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec {
            omega: 100.0,
            zeta: 2.0,
        }
    }
}

/// Data-collection PD gains (scalar, applied to every joint).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PdSpec {
    #[serde(default = "default_pd_kp")]
    pub kp: f64,
    #[serde(default = "default_pd_kd")]
    pub kd: f64,
}

impl Default for PdSpec {
    fn default() -> Self {
        PdSpec {
            kp: DEFAULT_PD_KP,
            kd: DEFAULT_PD_KD,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Low-pass filtered white noise, the data-collection excitation.
    FilteredNoise {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_cutoff")]
        cutoff_hz: f64,
    },
    /// Growing-amplitude sinusoids, the tracking benchmark. An empty
    /// frequency list samples one frequency per joint from the run seed.
    GrowingSine {
        #[serde(default)]
        frequencies: Vec<f64>,
    },
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::FilteredNoise {
            amplitude: DEFAULT_NOISE_AMPLITUDE,
            cutoff_hz: DEFAULT_NOISE_CUTOFF_HZ,
        }
    }
}

/// One experiment description, loaded from JSON. Paths are used as given
/// (relative paths resolve against the working directory), except that
/// unset dataset/model paths land in `out_dir`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Robot description file.
    pub robot: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_downsample")]
    pub downsample: usize,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub controller: Option<ControllerKind>,
    #[serde(default)]
    pub gains: GainSpec,
    #[serde(default)]
    pub pd: PdSpec,
    #[serde(default)]
    pub kernel: Option<KernelKind>,
    #[serde(default)]
    pub integrator: Option<Integrator>,
    #[serde(default)]
    pub train_data: Option<PathBuf>,
    #[serde(default)]
    pub test_data: Option<PathBuf>,
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    /// Initial tracking error per joint (rad), subtracted from r(0).
    #[serde(default)]
    pub initial_error: Option<Vec<f64>>,
    #[serde(default = "default_search_subsample")]
    pub search_subsample: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub emit_plots: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("config duration", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("config dt", "must be positive"));
        }
        if self.downsample == 0 {
            return Err(Error::invalid("config downsample", "must be at least 1"));
        }
        if !self.robot.exists() {
            return Err(Error::invalid(
                "config robot",
                format!("file {} does not exist", self.robot.display()),
            ));
        }
        Ok(())
    }

    pub fn train_data_path(&self) -> PathBuf {
        self.train_data
            .clone()
            .unwrap_or_else(|| self.out_dir.join("train.csv"))
    }

    pub fn test_data_path(&self) -> PathBuf {
        self.test_data
            .clone()
            .unwrap_or_else(|| self.out_dir.join("test.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_file
            .clone()
            .unwrap_or_else(|| self.out_dir.join("model.json"))
    }

    fn integrator(&self) -> Integrator {
        self.integrator.unwrap_or(Integrator::SemiImplicitEuler)
    }

    fn kernel_spec(&self, robot: &RobotModel) -> KernelSpec {
        match self.kernel.unwrap_or(KernelKind::Gip) {
            KernelKind::Se => KernelSpec::se(3 * robot.dof()),
            KernelKind::Gip => KernelSpec::gip(&robot.joint_types()),
        }
    }

    fn reference(&self, n: usize, seed: u64) -> Result<Reference> {
        match &self.reference {
            ReferenceSpec::FilteredNoise {
                amplitude,
                cutoff_hz,
            } => filtered_noise_reference(seed, n, self.duration, self.dt, *cutoff_hz, *amplitude),
            ReferenceSpec::GrowingSine { frequencies } => {
                let freqs = if frequencies.is_empty() {
                    sample_sine_frequencies(n, seed)
                } else if frequencies.len() == n {
                    frequencies.clone()
                } else {
                    return Err(Error::DimensionMismatch {
                        what: "reference frequencies".into(),
                        expected: n,
                        got: frequencies.len(),
                    });
                };
                growing_sine_reference(&freqs, self.duration, self.dt)
            }
        }
    }
}

fn ensure_out_dir(config: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of `cmd_generate_data`: where the datasets went and their sizes.
#[derive(Debug, Serialize)]
pub struct GenerateReport {
    pub train_path: PathBuf,
    pub train_rows: usize,
    pub test_path: PathBuf,
    pub test_rows: usize,
}

/// Simulates the PD data-collection loop against the configured excitation
/// and writes a training and a held-out dataset. The held-out set uses a
/// fresh seed with identical parameters.
pub fn cmd_generate_data(config: &ExperimentConfig) -> Result<GenerateReport> {
    let robot = RobotModel::load(&config.robot)?;
    let n = robot.dof();
    ensure_out_dir(config)?;

    let gains = Gains::new(
        DVector::from_element(n, config.pd.kp),
        DVector::from_element(n, config.pd.kd),
    )?;
    let controller = PdController { gains };

    let mut sizes = [0usize; 2];
    let jobs = [
        (config.train_data_path(), config.seed),
        (config.test_data_path(), config.seed + 1),
    ];
    for (i, (path, seed)) in jobs.iter().enumerate() {
        let reference = config.reference(n, *seed)?;
        let mut sim = SimConfig::new(config.dt, config.duration);
        sim.integrator = config.integrator();
        sim.seed = *seed;
        let log = simulate(&robot, &controller, &reference, &JointState::zero(n), &sim)?;
        let dataset = Dataset::from_log(&log, config.downsample)?;
        dataset.save_csv(path)?;
        sizes[i] = dataset.len();
    }
    Ok(GenerateReport {
        train_path: jobs[0].0.clone(),
        train_rows: sizes[0],
        test_path: jobs[1].0.clone(),
        test_rows: sizes[1],
    })
}

#[derive(Debug, Serialize)]
pub struct JointTrainStats {
    pub likelihood: f64,
    pub noise: f64,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct TrainReport {
    pub model_path: PathBuf,
    pub joints: Vec<JointTrainStats>,
    pub total_seconds: f64,
}

/// Per-joint hyperparameter search on an even subsample of the training
/// rows, then a full-data fit with the tuned parameters. Writes the model
/// file plus a wall-clock sidecar (which is the only non-deterministic
/// artifact, so it lives outside the model file).
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainReport> {
    let robot = RobotModel::load(&config.robot)?;
    let dataset = Dataset::load_csv(&config.train_data_path())?;
    if dataset.len() < 100 {
        return Err(Error::invalid(
            "training dataset",
            format!("needs at least 100 rows, got {}", dataset.len()),
        ));
    }
    if dataset.n_joints != robot.dof() {
        return Err(Error::DimensionMismatch {
            what: "training dataset joints".into(),
            expected: robot.dof(),
            got: dataset.n_joints,
        });
    }
    ensure_out_dir(config)?;

    let spec = config.kernel_spec(&robot);
    let search_set = dataset.subsample(config.search_subsample);
    let start = Instant::now();
    let mut joints = Vec::with_capacity(dataset.n_joints);
    let mut stats = Vec::with_capacity(dataset.n_joints);
    for j in 0..dataset.n_joints {
        let joint_start = Instant::now();
        let y_search = search_set.joint_targets(j);
        let mean = y_search.mean();
        let std = (y_search.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / y_search.len() as f64)
            .sqrt();
        let sigma_seed = (0.1 * std).max(1e-3);
        // A unit signal variance next to targets spanning hundreds of
        // newton-metres starts the search inside the all-noise basin, so
        // seed the scale at the empirical target variance.
        let mut joint_spec = spec.clone();
        if let KernelSpec::Se { scale, .. } = &mut joint_spec {
            *scale = (std * std).max(1e-6);
        }
        let options = OptimizeOptions {
            max_iterations: config.max_iterations,
            restarts: config.restarts,
            seed: config.seed.wrapping_add(j as u64),
            perturbation: 0.8,
        };
        let tuned = optimize_hyperparameters(
            &joint_spec,
            sigma_seed,
            &search_set.inputs,
            &y_search,
            &options,
        )
        .map_err(|e| Error::OptimizationFailed(format!("joint {}: {e}", j + 1)))?;
        let y_full = dataset.joint_targets(j);
        let model = GpModel::fit(&dataset.inputs, &y_full, &tuned.kernel, tuned.noise)
            .map_err(|e| Error::OptimizationFailed(format!("joint {}: {e}", j + 1)))?;
        joints.push(model);
        stats.push(JointTrainStats {
            likelihood: tuned.likelihood,
            noise: tuned.noise,
            seconds: joint_start.elapsed().as_secs_f64(),
        });
    }

    let model = TorqueModel { joints };
    let model_path = config.model_path();
    model.save(&model_path)?;

    let report = TrainReport {
        model_path: model_path.clone(),
        joints: stats,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    let sidecar = model_path.with_extension("stats.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::parse(&sidecar, e.to_string()))?;
    write_text(&sidecar, &text)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct JointEval {
    pub nmse_percent: f64,
    /// Absolute-error quantiles: min, lower quartile, median, upper
    /// quartile, max.
    pub abs_error_quantiles: [f64; 5],
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub report_path: PathBuf,
    pub joints: Vec<JointEval>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Evaluates a trained model on a held-out dataset: per-joint normalized
/// mean squared error plus absolute-error quantiles for boxplots, written as
/// one CSV row per joint.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<EvalReport> {
    let model = TorqueModel::load(&config.model_path())?;
    let dataset = Dataset::load_csv(&config.test_data_path())?;
    if dataset.n_joints != model.n_joints() {
        return Err(Error::DimensionMismatch {
            what: "evaluation dataset joints".into(),
            expected: model.n_joints(),
            got: dataset.n_joints,
        });
    }
    ensure_out_dir(config)?;

    let mut joints = Vec::with_capacity(model.n_joints());
    let mut csv = String::from("joint,nmse_percent,abs_min,abs_q25,abs_median,abs_q75,abs_max\n");
    for j in 0..model.n_joints() {
        let targets = dataset.joint_targets(j);
        let mut predictions = DVector::zeros(dataset.len());
        for (i, x) in dataset.inputs.iter().enumerate() {
            predictions[i] = model.joints[j].predict_mean(x)?;
        }
        let score = nmse(&predictions, &targets)?;
        let mut abs: Vec<f64> = predictions
            .iter()
            .zip(targets.iter())
            .map(|(p, y)| (p - y).abs())
            .collect();
        abs.sort_by(|a, b| a.total_cmp(b));
        let q = [
            abs[0],
            quantile(&abs, 0.25),
            quantile(&abs, 0.5),
            quantile(&abs, 0.75),
            abs[abs.len() - 1],
        ];
        let _ = writeln!(
            csv,
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            j + 1,
            score,
            q[0],
            q[1],
            q[2],
            q[3],
            q[4]
        );
        joints.push(JointEval {
            nmse_percent: score,
            abs_error_quantiles: q,
        });
    }
    let report_path = config.out_dir.join("evaluation.csv");
    write_text(&report_path, &csv)?;
    Ok(EvalReport {
        report_path,
        joints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackOutcome {
    Completed,
    /// Commanded torques collapsed while the tracking error was large.
    Degraded { time: f64 },
    /// The state left the simulator's divergence guard.
    Diverged { time: f64 },
}

#[derive(Debug, Serialize)]
pub struct JointTrackSummary {
    pub max_error_rad: f64,
    pub max_error_deg: f64,
    /// Largest error over the final second of the horizon.
    pub steady_state_rad: f64,
    pub steady_state_deg: f64,
}

#[derive(Debug, Serialize)]
pub struct TrackReport {
    pub outcome: TrackOutcome,
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    pub joints: Vec<JointTrackSummary>,
}

/// First time commanded torques collapse toward zero while the tracking
/// error is still large: the infinity norm of tau falls below 1% of its
/// running median (floored at 1e-6 N m for all-zero histories) while the
/// error exceeds one degree.
pub fn detect_degradation(log: &TrajectoryLog) -> Option<f64> {
    let one_degree = std::f64::consts::PI / 180.0;
    let mut history: Vec<f64> = Vec::with_capacity(log.len());
    for k in 0..log.len() {
        let tau = log.tau[k].amax();
        let pos = history.partition_point(|v| *v < tau);
        history.insert(pos, tau);
        let median = history[history.len() / 2];
        let threshold = (0.01 * median).max(1e-6);
        if tau < threshold && log.e[k].amax() > one_degree {
            return Some(log.time[k]);
        }
    }
    None
}

fn summarize_joints(log: &TrajectoryLog, dt: f64) -> Vec<JointTrackSummary> {
    let n = log.dof();
    let steady_steps = ((1.0 / dt).round() as usize).clamp(1, log.len());
    let tail = log.len() - steady_steps;
    (0..n)
        .map(|j| {
            let max = log.e.iter().map(|e| e[j].abs()).fold(0.0, f64::max);
            let steady = log.e[tail..]
                .iter()
                .map(|e| e[j].abs())
                .fold(0.0, f64::max);
            JointTrackSummary {
                max_error_rad: max,
                max_error_deg: max.to_degrees(),
                steady_state_rad: steady,
                steady_state_deg: steady.to_degrees(),
            }
        })
        .collect()
}

/// Runs the configured controller against the configured reference and
/// writes the trajectory log, a per-joint error summary, and optional SVG
/// plots. Divergence and degradation are reported in the outcome rather than
/// as errors so the artifacts always land on disk.
pub fn cmd_track(config: &ExperimentConfig) -> Result<TrackReport> {
    let robot = RobotModel::load(&config.robot)?;
    let n = robot.dof();
    ensure_out_dir(config)?;
    let reference = config.reference(n, config.seed)?;

    let gains = Gains::from_natural_frequency(config.gains.omega, config.gains.zeta, n)?;
    let controller: Box<dyn Controller> = match config.controller.unwrap_or(ControllerKind::GpFl)
    {
        ControllerKind::Pd => Box::new(PdController {
            gains: Gains::new(
                DVector::from_element(n, config.pd.kp),
                DVector::from_element(n, config.pd.kd),
            )?,
        }),
        ControllerKind::ExactFl => Box::new(ExactFlController {
            model: robot.clone(),
            gains,
        }),
        ControllerKind::GpFl => Box::new(GpFlController {
            model: TorqueModel::load(&config.model_path())?,
            gains,
        }),
        ControllerKind::GpFlDce => Box::new(GpFlDceController {
            model: TorqueModel::load(&config.model_path())?,
            gains,
        }),
    };

    let e0 = match &config.initial_error {
        Some(v) if v.len() == n => DVector::from_vec(v.clone()),
        Some(v) => {
            return Err(Error::DimensionMismatch {
                what: "initial_error".into(),
                expected: n,
                got: v.len(),
            })
        }
        None => DVector::zeros(n),
    };
    let init = JointState {
        q: &reference.r[0] - &e0,
        dq: reference.dr[0].clone(),
        ddq: DVector::zeros(n),
    };

    let mut sim = SimConfig::new(config.dt, config.duration);
    sim.integrator = config.integrator();
    sim.seed = config.seed;

    let (log, mut outcome) = match simulate(&robot, controller.as_ref(), &reference, &init, &sim)
    {
        Ok(log) => (log, TrackOutcome::Completed),
        Err(Error::Divergence { time, log, .. }) => (*log, TrackOutcome::Diverged { time }),
        Err(e) => return Err(e),
    };
    // A torque collapse precedes any divergence it causes, so the detector
    // wins over the divergence guard when both fire.
    if let Some(time) = detect_degradation(&log) {
        outcome = TrackOutcome::Degraded { time };
    }

    let log_path = config.out_dir.join("track_log.csv");
    log.save_csv(&log_path)?;

    let joints = summarize_joints(&log, config.dt);
    let summary = serde_json::json!({
        "outcome": outcome,
        "joints": joints,
    });
    let summary_path = config.out_dir.join("track_summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::parse(&summary_path, e.to_string()))?;
    write_text(&summary_path, &text)?;

    if config.emit_plots {
        emit_plots(config, &log)?;
    }

    Ok(TrackReport {
        outcome,
        log_path,
        summary_path,
        joints,
    })
}

#[derive(Debug, Serialize)]
pub struct ComponentsReport {
    pub path: PathBuf,
    pub rows: usize,
}

/// Dumps estimated against true dynamics components on a seeded grid of
/// in-distribution states: gravity, inertia (row-major) and bias per row.
pub fn cmd_dump_components(config: &ExperimentConfig, grid: usize) -> Result<ComponentsReport> {
    if grid == 0 {
        return Err(Error::invalid("component grid", "needs at least one point"));
    }
    let robot = RobotModel::load(&config.robot)?;
    let model = TorqueModel::load(&config.model_path())?;
    let n = robot.dof();
    if model.n_joints() != n {
        return Err(Error::DimensionMismatch {
            what: "model joints".into(),
            expected: n,
            got: model.n_joints(),
        });
    }
    ensure_out_dir(config)?;

    let mut header = String::new();
    let scalar_cols = |prefix: &str, count: usize, out: &mut String| {
        for i in 1..=count {
            out.push_str(prefix);
            let _ = write!(out, "{i}");
            out.push(',');
        }
    };
    scalar_cols("q", n, &mut header);
    scalar_cols("dq", n, &mut header);
    scalar_cols("ghat", n, &mut header);
    scalar_cols("g", n, &mut header);
    for i in 1..=n {
        for j in 1..=n {
            let _ = write!(header, "bhat{i}{j},");
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            let _ = write!(header, "b{i}{j},");
        }
    }
    scalar_cols("nhat", n, &mut header);
    scalar_cols("n", n, &mut header);
    header.pop();
    header.push('\n');

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut csv = header;
    for _ in 0..grid {
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-1.2..1.2));
        let dq = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));

        let ghat = estimate_gravity(&model, &q)?;
        let g = gravity_vector(&robot, &q)?;
        let bhat = estimate_inertia(&model, &q)?;
        let b = mass_matrix(&robot, &q)?;
        let nhat = estimate_bias(&model, &q, &dq)?;
        let nv = bias_forces(&robot, &q, &dq)?;

        let mut fields: Vec<f64> = Vec::new();
        fields.extend(q.iter());
        fields.extend(dq.iter());
        fields.extend(ghat.iter());
        fields.extend(g.iter());
        fields.extend(bhat.transpose().iter());
        fields.extend(b.transpose().iter());
        fields.extend(nhat.iter());
        fields.extend(nv.iter());
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }

    let path = config.out_dir.join("components.csv");
    write_text(&path, &csv)?;
    Ok(ComponentsReport { path, rows: grid })
}

const SVG_PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Minimal line chart: one polyline per series over a shared time axis.
fn polyline_svg(title: &str, time: &[f64], series: &[(String, &[f64], bool)]) -> String {
    let (w, h, ml, mr, mt, mb) = (800.0, 400.0, 60.0, 20.0, 40.0, 40.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let tmin = time.first().copied().unwrap_or(0.0);
    let tmax = time.last().copied().unwrap_or(1.0).max(tmin + 1e-9);
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (_, values, _) in series {
        for v in *values {
            vmin = vmin.min(*v);
            vmax = vmax.max(*v);
        }
    }
    if !(vmin.is_finite() && vmax.is_finite()) {
        vmin = -1.0;
        vmax = 1.0;
    }
    if vmax - vmin < 1e-12 {
        vmax += 0.5;
        vmin -= 0.5;
    }
    let x = |t: f64| ml + pw * (t - tmin) / (tmax - tmin);
    let y = |v: f64| mt + ph * (1.0 - (v - vmin) / (vmax - vmin));

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    );
    let _ = write!(
        svg,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"#444\"/>\n",
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for (label, t) in [(tmin, tmin), (tmax, tmax)] {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{label:.2}</text>\n",
            x(t),
            h - mb + 16.0
        );
    }
    for v in [vmin, vmax] {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">{v:.3}</text>\n",
            ml - 6.0,
            y(v) + 4.0
        );
    }
    for (idx, (name, values, dashed)) in series.iter().enumerate() {
        let color = SVG_PALETTE[idx % SVG_PALETTE.len()];
        let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let mut points = String::new();
        let stride = (time.len() / 2000).max(1);
        for (k, (t, v)) in time.iter().zip(values.iter()).enumerate() {
            if k % stride == 0 {
                let _ = write!(points, "{:.2},{:.2} ", x(*t), y(*v));
            }
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} \
             points=\"{points}\"/>\n"
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{name}</text>\n",
            w - mr - 120.0,
            mt + 16.0 * (idx as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn emit_plots(config: &ExperimentConfig, log: &TrajectoryLog) -> Result<()> {
    let n = log.dof();
    let errors: Vec<Vec<f64>> = (0..n)
        .map(|j| log.e.iter().map(|e| e[j]).collect())
        .collect();
    let error_series: Vec<(String, &[f64], bool)> = errors
        .iter()
        .enumerate()
        .map(|(j, v)| (format!("e{}", j + 1), v.as_slice(), false))
        .collect();
    write_text(
        &config.out_dir.join("tracking_error.svg"),
        &polyline_svg("tracking error (rad)", &log.time, &error_series),
    )?;

    let mut position_series: Vec<(String, Vec<f64>, bool)> = Vec::new();
    for j in 0..n {
        position_series.push((format!("q{}", j + 1), log.q.iter().map(|q| q[j]).collect(), false));
        position_series.push((format!("r{}", j + 1), log.r.iter().map(|r| r[j]).collect(), true));
    }
    let borrowed: Vec<(String, &[f64], bool)> = position_series
        .iter()
        .map(|(name, v, dashed)| (name.clone(), v.as_slice(), *dashed))
        .collect();
    write_text(
        &config.out_dir.join("tracking_positions.svg"),
        &polyline_svg("joint positions vs reference (rad)", &log.time, &borrowed),
    )?;
    Ok(())
}

/// Maps errors to process exit codes: 2 for validation problems, 3 for
/// numerical failures, 4 for divergence or degradation.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Invalid { .. }
        | Error::DimensionMismatch { .. }
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::UndefinedMetric => 2,
        Error::NonFinite { .. }
        | Error::SingularDynamics
        | Error::IllConditionedKernel { .. }
        | Error::OptimizationFailed(_) => 3,
        Error::Divergence { .. } | Error::Degradation { .. } | Error::ControllerFault { .. } => 4,
    }
}
