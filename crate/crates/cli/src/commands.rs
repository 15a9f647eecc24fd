//! Implementations of the `bmf` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bmf_core::diagnostics::{
    aggregate_chains, autocorrelation, integrated_autocorrelation_time, rmse, ChainTrace, ChainsSummary,
};
use bmf_core::samplers::{init_from_prior, run_gibbs_chain, run_hmc_chain, GibbsConfig, HmcConfig};
use bmf_core::symmetry::{certify_symmetry_breaking, verify_invariance, SymmetryCertificate, DEFAULT_RANK_TOL};
use bmf_core::{ChainRng, FactorModel, Observation, ObservationSet};
use nalgebra::DMatrix;
use rand::distr::Uniform;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MeanMode, NoiseMode, SamplerKind};
use crate::error::{CliError, CliResult};
use crate::io;

const MEAN_SEED_SALT: u64 = 0x6a09_e667_f3bc_c908;
const VERIFY_SEED_SALT: u64 = 0xbb67_ae85_84ca_a73b;
const VERIFY_TRIALS: usize = 20;
const VERIFY_TOL: f64 = 1e-8;

/// Seed of the generator that draws prior mean matrices.
pub fn mean_seed(base_seed: u64) -> u64 {
    base_seed ^ MEAN_SEED_SALT
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub fraction: f64,
    pub tau_eta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub truth: DMatrix<f64>,
    pub obs: ObservationSet,
}

pub fn simulate_data(args: &SimulateArgs) -> CliResult<SimulatedData> {
    let SimulateArgs {
        m,
        n,
        rank,
        fraction,
        tau_eta,
        seed,
    } = *args;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::usage(format!("fraction {fraction} must lie in (0, 1]")));
    }
    if m == 0 || n == 0 || rank == 0 {
        return Err(CliError::usage("m, n and rank must be positive"));
    }
    if !(tau_eta.is_finite() && tau_eta > 0.0) {
        return Err(CliError::usage(format!("tau_eta {tau_eta} must be positive")));
    }
    let mut rng = ChainRng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let truth = &a * b.transpose();
    let count = ((fraction * (m * n) as f64).ceil() as usize).min(m * n);
    let sd = tau_eta.sqrt().recip();
    let entries = sample_indices(&mut rng, m * n, count)
        .into_iter()
        .map(|l| {
            let (row, col) = (l / n, l % n);
            Observation {
                row,
                col,
                value: truth[(row, col)] + sd * rng.sample::<f64, _>(StandardNormal),
            }
        })
        .collect();
    let obs = ObservationSet::new(m, n, entries)?;
    Ok(SimulatedData { a, b, truth, obs })
}

/// Writes `truth.csv`, `a_true.csv`, `b_true.csv` and `observations.csv`.
pub fn simulate(args: &SimulateArgs, out: &Path) -> CliResult<SimulatedData> {
    let data = simulate_data(args)?;
    ensure_dir(out)?;
    io::write_matrix(&out.join("truth.csv"), &data.truth)?;
    io::write_matrix(&out.join("a_true.csv"), &data.a)?;
    io::write_matrix(&out.join("b_true.csv"), &data.b)?;
    io::write_observations(&out.join("observations.csv"), &data.obs)?;
    Ok(data)
}

// ---------------------------------------------------------------- model

/// The prior described by `cfg`, with mean matrices drawn or loaded per `mean_mode`.
pub fn build_model(cfg: &ExperimentConfig) -> CliResult<FactorModel> {
    let usage = |e: bmf_core::Error| CliError::usage(format!("config: {e}"));
    let base = FactorModel::zero_mean(
        cfg.m,
        cfg.n,
        cfg.tau_a.clone().into(),
        cfg.tau_b.clone().into(),
        cfg.noise_shape,
        cfg.noise_rate,
    )
    .map_err(usage)?;
    let (r, m, n) = (cfg.rank, cfg.m, cfg.n);
    match &cfg.mean_mode {
        MeanMode::Zero => Ok(base),
        MeanMode::Uniform { lo, hi } => {
            let dist = Uniform::new(*lo, *hi).map_err(|e| CliError::usage(format!("mean range: {e}")))?;
            let mut rng = ChainRng::seed_from_u64(mean_seed(cfg.seed));
            let ma = DMatrix::from_fn(m, r, |_, _| rng.sample(dist));
            let mb = DMatrix::from_fn(n, r, |_, _| rng.sample(dist));
            base.with_means(ma, mb).map_err(usage)
        }
        MeanMode::File(path) => {
            let stacked = io::read_matrix(path)?;
            if stacked.shape() != (m + n, r) {
                return Err(CliError::usage(format!(
                    "{}: expected a {}x{r} stack of M_a over M_b, found {}x{}",
                    path.display(),
                    m + n,
                    stacked.nrows(),
                    stacked.ncols()
                )));
            }
            let ma = stacked.rows(0, m).into_owned();
            let mb = stacked.rows(m, n).into_owned();
            base.with_means(ma, mb).map_err(usage)
        }
    }
}

fn load_observations(cfg: &ExperimentConfig) -> CliResult<ObservationSet> {
    let path = cfg
        .obs_path
        .as_ref()
        .ok_or_else(|| CliError::usage("config: `obs_path` is required"))?;
    io::read_observations(path, cfg.m, cfg.n)
}

// ---------------------------------------------------------------- symmetry

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub certificate: SymmetryCertificate,
    /// Outcome of the invariance check on the counterexample, if there is one.
    pub verified: Option<bool>,
}

pub fn symmetry_report(cfg: &ExperimentConfig, model: &FactorModel, obs: &ObservationSet) -> CliResult<SymmetryReport> {
    let certificate = certify_symmetry_breaking(model, DEFAULT_RANK_TOL)?;
    let verified = match &certificate.counterexample {
        Some(w) => {
            let mut rng = ChainRng::seed_from_u64(cfg.seed ^ VERIFY_SEED_SALT);
            Some(verify_invariance(model, obs, w, VERIFY_TRIALS, VERIFY_TOL, &mut rng)?)
        }
        None => None,
    };
    Ok(SymmetryReport { certificate, verified })
}

fn format_symmetry_sections(report: &SymmetryReport) -> String {
    let cert = &report.certificate;
    let mut s = String::from("[PARTITION]\n");
    let _ = writeln!(s, "blocks: {}", cert.partition.len());
    for (l, (block, product)) in cert.partition.blocks().iter().zip(cert.partition.products()).enumerate() {
        let cols: Vec<String> = block.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "block_{l}: {}", cols.join(","));
        let _ = writeln!(s, "product_{l}: {product}");
    }
    s.push_str("\n[RANKS]\n");
    for (l, br) in cert.block_ranks.iter().enumerate() {
        let _ = writeln!(s, "rank_{l}: size={} rank={}", br.columns, br.rank);
    }
    s.push_str("\n[BROKEN]\n");
    let _ = writeln!(s, "broken: {}", cert.broken);
    match (&cert.counterexample, report.verified) {
        (Some(w), Some(ok)) => {
            let _ = writeln!(s, "counterexample: present");
            let _ = writeln!(s, "counterexample_verified: {ok}");
            for (i, row) in w.w().row_iter().enumerate() {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                let _ = writeln!(s, "w_row_{i}: {}", cells.join(","));
            }
        }
        _ => {
            let _ = writeln!(s, "counterexample: none");
        }
    }
    s
}

/// Builds the configured prior and writes `symmetry.txt`.
pub fn check_symmetry(cfg: &ExperimentConfig, out: &Path) -> CliResult<SymmetryReport> {
    let model = build_model(cfg)?;
    let obs = match &cfg.obs_path {
        Some(_) => load_observations(cfg)?,
        None => {
            // no data configured: probe with a fully observed Gaussian matrix
            let mut rng = ChainRng::seed_from_u64(cfg.seed ^ VERIFY_SEED_SALT);
            let x = DMatrix::from_fn(cfg.m, cfg.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            ObservationSet::fully_observed(&x)?
        }
    };
    let report = symmetry_report(cfg, &model, &obs)?;
    ensure_dir(out)?;
    let mut text = format_symmetry_sections(&report);
    if let MeanMode::Uniform { .. } = cfg.mean_mode {
        let _ = write!(text, "\n[SEEDS]\nmean_seed: {}\n", mean_seed(cfg.seed));
    }
    io::write_file(&out.join("symmetry.txt"), &text)?;
    Ok(report)
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub traces: Vec<ChainTrace>,
    pub summary: ChainsSummary,
    pub symmetry: SymmetryReport,
    pub rmse: Option<f64>,
}

impl SampleOutcome {
    /// Mean over chains of the per-chain integrated autocorrelation time.
    pub fn mean_tau_int(&self, monitor: &str) -> Option<f64> {
        let taus: Vec<f64> = self.summary.monitor(monitor)?.chain_tau_int.iter().flatten().copied().collect();
        (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64)
    }
}

pub fn chain_seed(base_seed: u64, chain: usize) -> u64 {
    base_seed.wrapping_add(chain as u64)
}

fn run_chain(
    cfg: &ExperimentConfig,
    model: &FactorModel,
    obs: &ObservationSet,
    chain: usize,
) -> bmf_core::Result<ChainTrace> {
    let seed = chain_seed(cfg.seed, chain);
    // the starting point comes from a separate stream of the chain's generator
    let mut init_rng = ChainRng::seed_from_u64(seed);
    init_rng.set_stream(1);
    let init = init_from_prior(model, &mut init_rng, cfg.tau_eta)?;
    let sample_noise_precision = cfg.noise_mode == NoiseMode::Gamma;
    match cfg.sampler {
        SamplerKind::Gibbs => {
            let g = GibbsConfig {
                iterations: cfg.iterations,
                burn_in: cfg.burn_in,
                thinning: cfg.thinning,
                seed,
                sample_noise_precision,
            };
            run_gibbs_chain(model, obs, &g, init, &cfg.monitors)
        }
        SamplerKind::Hmc {
            step_size,
            leapfrog_steps,
        } => {
            let h = HmcConfig {
                iterations: cfg.iterations,
                burn_in: cfg.burn_in,
                thinning: cfg.thinning,
                seed,
                step_size,
                leapfrog_steps,
                sample_noise_precision,
            };
            run_hmc_chain(model, obs, &h, init, &cfg.monitors)
        }
    }
}

fn run_chains(
    cfg: &ExperimentConfig,
    model: &FactorModel,
    obs: &ObservationSet,
    threads: usize,
) -> CliResult<Vec<ChainTrace>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let results: Vec<bmf_core::Result<ChainTrace>> =
        pool.install(|| (0..cfg.chains).into_par_iter().map(|c| run_chain(cfg, model, obs, c)).collect());
    Ok(results.into_iter().collect::<bmf_core::Result<Vec<_>>>()?)
}

fn format_summary(cfg: &ExperimentConfig, outcome: &SampleOutcome) -> String {
    let mut s = format_symmetry_sections(&outcome.symmetry);

    s.push_str("\n[RMSE]\n");
    match outcome.rmse {
        Some(v) => {
            let _ = writeln!(s, "pooled: {v}");
        }
        None => s.push_str("pooled: n/a\n"),
    }

    s.push_str("\n[TAU_INT]\n");
    for mon in &outcome.summary.monitors {
        for (c, tau) in mon.chain_tau_int.iter().enumerate() {
            match tau {
                Some(t) => {
                    let _ = writeln!(s, "{}.chain_{c}: {t}", mon.name);
                }
                None => {
                    let _ = writeln!(s, "{}.chain_{c}: n/a", mon.name);
                }
            }
        }
        if let Some(t) = outcome.mean_tau_int(&mon.name) {
            let _ = writeln!(s, "{}.mean: {t}", mon.name);
        }
    }

    s.push_str("\n[SEEDS]\n");
    let _ = writeln!(s, "base_seed: {}", cfg.seed);
    match cfg.mean_mode {
        MeanMode::Uniform { .. } => {
            let _ = writeln!(s, "mean_seed: {}", mean_seed(cfg.seed));
        }
        _ => s.push_str("mean_seed: n/a\n"),
    }
    for c in 0..cfg.chains {
        let _ = writeln!(s, "chain_{c}: {}", chain_seed(cfg.seed, c));
    }

    s.push_str("\n[RUN]\n");
    let sampler = match cfg.sampler {
        SamplerKind::Gibbs => "gibbs".to_string(),
        SamplerKind::Hmc {
            step_size,
            leapfrog_steps,
        } => format!("hmc step_size={step_size} leapfrog_steps={leapfrog_steps}"),
    };
    let _ = writeln!(s, "sampler: {sampler}");
    match cfg.noise_mode {
        NoiseMode::Fixed => {
            let _ = writeln!(s, "noise: fixed tau_eta={} (no Gamma update)", cfg.tau_eta);
        }
        NoiseMode::Gamma => {
            let _ = writeln!(
                s,
                "noise: gamma shape={} rate={} init={}",
                cfg.noise_shape, cfg.noise_rate, cfg.tau_eta
            );
        }
    }
    let _ = writeln!(
        s,
        "schedule: chains={} iterations={} burn_in={} thinning={}",
        cfg.chains, cfg.iterations, cfg.burn_in, cfg.thinning
    );
    for (c, t) in outcome.traces.iter().enumerate() {
        if let Some(rate) = t.acceptance_rate {
            let _ = writeln!(s, "acceptance_chain_{c}: {rate}");
            let _ = writeln!(s, "non_finite_chain_{c}: {}", t.non_finite_rejections);
        }
    }
    s
}

/// Runs every configured chain and writes traces, the pooled reconstruction
/// and `summary.txt` to `out`.
pub fn sample(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> CliResult<SampleOutcome> {
    let obs = load_observations(cfg)?;
    let model = build_model(cfg)?;
    let truth = cfg.truth_path.as_deref().map(io::read_matrix).transpose()?;
    if let Some(t) = &truth {
        if t.shape() != (cfg.m, cfg.n) {
            return Err(CliError::usage(format!(
                "truth matrix is {}x{}, expected {}x{}",
                t.nrows(),
                t.ncols(),
                cfg.m,
                cfg.n
            )));
        }
    }
    let symmetry = symmetry_report(cfg, &model, &obs)?;
    let threads = threads.or(cfg.threads).unwrap_or(cfg.chains).max(1);
    let traces = run_chains(cfg, &model, &obs, threads)?;
    let summary = aggregate_chains(&traces)?;
    let rmse = truth.as_ref().map(|t| rmse(t, &summary.pooled_recon)).transpose()?;
    let outcome = SampleOutcome {
        traces,
        summary,
        symmetry,
        rmse,
    };

    ensure_dir(out)?;
    for (c, t) in outcome.traces.iter().enumerate() {
        io::write_file(&out.join(format!("trace_chain_{c}.csv")), &io::format_trace(t))?;
    }
    io::write_matrix(&out.join("reconstruction.csv"), &outcome.summary.pooled_recon)?;
    io::write_file(&out.join("summary.txt"), &format_summary(cfg, &outcome))?;
    Ok(outcome)
}

// ---------------------------------------------------------------- diagnose

#[derive(Debug, Clone)]
pub struct DiagnoseArgs {
    pub input_dir: PathBuf,
    pub max_lag: usize,
    pub truth: Option<PathBuf>,
    pub scatter: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauEntry {
    pub monitor: String,
    pub chain: usize,
    pub tau_int: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub tau: Vec<TauEntry>,
    pub rmse: Option<f64>,
}

fn trace_files(dir: &Path) -> Vec<PathBuf> {
    (0..)
        .map(|c| dir.join(format!("trace_chain_{c}.csv")))
        .take_while(|p| p.is_file())
        .collect()
}

/// Writes `acf.csv`, `tau_int.csv` and, when requested, `rmse.txt` and `scatter.csv`.
pub fn diagnose(args: &DiagnoseArgs, out: &Path) -> CliResult<DiagnoseReport> {
    let files = trace_files(&args.input_dir);
    if files.is_empty() {
        return Err(CliError::usage(format!(
            "no trace_chain_0.csv in {}",
            args.input_dir.display()
        )));
    }
    let traces = files.iter().map(|p| io::read_trace(p)).collect::<CliResult<Vec<_>>>()?;
    let names = traces[0].monitor_names.clone();
    if let Some(c) = traces.iter().position(|t| t.monitor_names != names) {
        return Err(CliError::usage(format!("chain {c} records different monitors than chain 0")));
    }

    let mut acf = String::from("monitor,chain,lag,rho\n");
    let mut tau_csv = String::from("monitor,chain,tau_int\n");
    let mut tau = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for (c, t) in traces.iter().enumerate() {
            let series = &t.samples[k];
            let lag = args.max_lag.min(series.len().saturating_sub(2));
            if series.len() >= 2 {
                if let Ok(rho) = autocorrelation(series, lag) {
                    for (l, r) in rho.iter().enumerate() {
                        let _ = writeln!(acf, "{name},{c},{l},{r}");
                    }
                }
            }
            let t_int = integrated_autocorrelation_time(series).ok();
            match t_int {
                Some(v) => {
                    let _ = writeln!(tau_csv, "{name},{c},{v}");
                }
                None => {
                    let _ = writeln!(tau_csv, "{name},{c},n/a");
                }
            }
            tau.push(TauEntry {
                monitor: name.clone(),
                chain: c,
                tau_int: t_int,
            });
        }
    }
    ensure_dir(out)?;
    io::write_file(&out.join("acf.csv"), &acf)?;
    io::write_file(&out.join("tau_int.csv"), &tau_csv)?;

    let rmse_value = match &args.truth {
        Some(truth_path) => {
            let truth = io::read_matrix(truth_path)?;
            let recon = io::read_matrix(&args.input_dir.join("reconstruction.csv"))?;
            let v = rmse(&truth, &recon).map_err(|e| CliError::usage(format!("truth vs reconstruction: {e}")))?;
            io::write_file(&out.join("rmse.txt"), &format!("rmse: {v}\n"))?;
            Some(v)
        }
        None => None,
    };

    if let Some((x, y)) = &args.scatter {
        for wanted in [x, y] {
            if !names.contains(wanted) {
                return Err(CliError::usage(format!(
                    "unknown monitor `{wanted}`; available: {}",
                    names.join(", ")
                )));
            }
        }
        let mut s = format!("chain,iter,{x},{y}\n");
        for (c, t) in traces.iter().enumerate() {
            let (xs, ys) = (t.series(x).unwrap_or_default(), t.series(y).unwrap_or_default());
            for ((it, a), b) in t.iterations.iter().zip(xs).zip(ys) {
                let _ = writeln!(s, "{c},{it},{a},{b}");
            }
        }
        io::write_file(&out.join("scatter.csv"), &s)?;
    }

    Ok(DiagnoseReport { tau, rmse: rmse_value })
}

// ---------------------------------------------------------------- repro

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(CliError::usage(format!("unknown scale {other:?}; use full or desk"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReproOutcome {
    pub zero: SampleOutcome,
    pub nonzero: SampleOutcome,
    pub monitors: Vec<String>,
}

impl ReproOutcome {
    /// `τ_int(zero) / τ_int(non-zero)` of the chain-averaged times.
    pub fn tau_ratio(&self, monitor: &str) -> Option<f64> {
        Some(self.zero.mean_tau_int(monitor)? / self.nonzero.mean_tau_int(monitor)?)
    }
}

pub const EXAMPLE_ONE: [[f64; 4]; 4] = [
    [1.0, 0.0, 1.0, 5.0],
    [2.0, -1.0, 1.0, 4.0],
    [4.0, -1.0, 3.0, 14.0],
    [3.0, -1.0, 2.0, 9.0],
];

struct ReproPlan {
    truth: DMatrix<f64>,
    obs: ObservationSet,
    base: ExperimentConfig,
    nonzero_means: MeanMode,
}

#[allow(clippy::too_many_arguments)]
fn arm_config(
    m: usize,
    n: usize,
    rank: usize,
    tau: f64,
    noise_mode: NoiseMode,
    tau_eta: f64,
    schedule: (usize, usize, usize, usize),
    monitors: &str,
    seed: u64,
) -> ExperimentConfig {
    let (chains, iterations, burn_in, thinning) = schedule;
    ExperimentConfig {
        m,
        n,
        rank,
        tau_a: vec![tau; rank],
        tau_b: vec![tau; rank],
        mean_mode: MeanMode::Zero,
        noise_mode,
        tau_eta,
        noise_shape: 3.0,
        noise_rate: 0.01,
        sampler: SamplerKind::Gibbs,
        chains,
        iterations,
        burn_in,
        thinning,
        seed,
        monitors: crate::config::parse_monitor_list(monitors).expect("built-in monitor list"),
        obs_path: Some(PathBuf::from("../observations.csv")),
        truth_path: Some(PathBuf::from("../truth.csv")),
        threads: None,
    }
}

fn plan(example: u32, scale: Scale, seed: u64) -> CliResult<ReproPlan> {
    match example {
        1 => {
            let truth = DMatrix::from_fn(4, 4, |i, j| EXAMPLE_ONE[i][j]);
            let mut rng = ChainRng::seed_from_u64(seed);
            let noisy = truth.map(|x| x + 0.01 * rng.sample::<f64, _>(StandardNormal));
            let obs = ObservationSet::fully_observed(&noisy)?;
            let schedule = match scale {
                Scale::Desk => (4, 5000, 500, 1),
                Scale::Full => (10, 20000, 2000, 1),
            };
            let base = arm_config(4, 4, 2, 1.0, NoiseMode::Gamma, 300.0, schedule, "A[0][0], A[0][1], B[0][0], tau_eta", seed);
            Ok(ReproPlan {
                truth,
                obs,
                base,
                nonzero_means: MeanMode::Uniform { lo: 0.0, hi: 1.0 },
            })
        }
        2 => {
            let (dim, rank, schedule) = match scale {
                Scale::Desk => (60, 4, (3, 3000, 500, 1)),
                Scale::Full => (100, 5, (5, 5000, 1000, 1)),
            };
            let data = simulate_data(&SimulateArgs {
                m: dim,
                n: dim,
                rank,
                fraction: 0.2,
                tau_eta: 1e4,
                seed,
            })?;
            let monitors: Vec<String> = (0..rank)
                .map(|k| format!("B[49][{k}]"))
                .chain(["A[0][0]".to_string(), "tau_eta".to_string()])
                .collect();
            let base = arm_config(dim, dim, rank, 1.0, NoiseMode::Gamma, 300.0, schedule, &monitors.join(","), seed);
            Ok(ReproPlan {
                truth: data.truth,
                obs: data.obs,
                base,
                nonzero_means: MeanMode::Uniform { lo: 0.0, hi: 1.0 },
            })
        }
        4 => {
            let schedule = match scale {
                Scale::Desk => (4, 3000, 1000, 1),
                Scale::Full => (4, 20000, 1000, 10),
            };
            let data = simulate_data(&SimulateArgs {
                m: 50,
                n: 50,
                rank: 10,
                fraction: 0.5,
                tau_eta: 1e2,
                seed,
            })?;
            let base = arm_config(50, 50, 10, 25.0, NoiseMode::Fixed, 1e2, schedule, "B[4][6], A[0][0]", seed);
            Ok(ReproPlan {
                truth: data.truth,
                obs: data.obs,
                base,
                nonzero_means: MeanMode::Uniform { lo: -3.5, hi: 3.5 },
            })
        }
        other => Err(CliError::usage(format!("unknown example {other}; choose 1, 2 or 4"))),
    }
}

/// Paired zero-mean / non-zero-mean experiment under `out/{zero,nonzero}`
/// with a `comparison.txt` at the top level.
pub fn repro(example: u32, scale: Scale, seed: u64, out: &Path, threads: Option<usize>) -> CliResult<ReproOutcome> {
    let plan = plan(example, scale, seed)?;
    ensure_dir(out)?;
    io::write_matrix(&out.join("truth.csv"), &plan.truth)?;
    io::write_observations(&out.join("observations.csv"), &plan.obs)?;

    let run_arm = |name: &str, means: MeanMode| -> CliResult<SampleOutcome> {
        let dir = out.join(name);
        ensure_dir(&dir)?;
        let mut cfg = plan.base.clone();
        cfg.mean_mode = means;
        io::write_file(&dir.join("config.txt"), &cfg.to_text())?;
        let cfg = ExperimentConfig::load(&dir.join("config.txt"))?;
        sample(&cfg, &dir, threads)
    };
    let zero = run_arm("zero", MeanMode::Zero)?;
    let nonzero = run_arm("nonzero", plan.nonzero_means.clone())?;

    let monitors: Vec<String> = plan.base.monitors.iter().map(ToString::to_string).collect();
    let outcome = ReproOutcome { zero, nonzero, monitors };

    let mut s = format!("example: {example}\nscale: {}\nseed: {seed}\n\n[RMSE]\n", match scale {
        Scale::Desk => "desk",
        Scale::Full => "full",
    });
    let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| x.to_string());
    let _ = writeln!(s, "zero: {}", fmt_opt(outcome.zero.rmse));
    let _ = writeln!(s, "nonzero: {}", fmt_opt(outcome.nonzero.rmse));
    s.push_str("\n[TAU_INT]\n");
    for mon in &outcome.monitors {
        let _ = writeln!(s, "{mon}.zero: {}", fmt_opt(outcome.zero.mean_tau_int(mon)));
        let _ = writeln!(s, "{mon}.nonzero: {}", fmt_opt(outcome.nonzero.mean_tau_int(mon)));
        let _ = writeln!(s, "{mon}.ratio: {}", fmt_opt(outcome.tau_ratio(mon)));
    }
    s.push_str("\n[BROKEN]\n");
    let _ = writeln!(s, "zero: {}", outcome.zero.symmetry.certificate.broken);
    let _ = writeln!(s, "nonzero: {}", outcome.nonzero.symmetry.certificate.broken);
    if plan.base.noise_mode == NoiseMode::Fixed {
        let _ = writeln!(s, "\nnote: tau_eta fixed at {} without a Gamma update", plan.base.tau_eta);
    }
    io::write_file(&out.join("comparison.txt"), &s)?;
    Ok(outcome)
}
