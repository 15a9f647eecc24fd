//! Flat `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bmf_core::samplers::{Monitor, DEFAULT_LEAPFROG_STEPS, DEFAULT_STEP_SIZE};

use crate::error::{CliError, CliResult};

pub const KEYS: [&str; 25] = [
    "m",
    "n",
    "rank",
    "tau_a",
    "tau_b",
    "mean_mode",
    "mean_lo",
    "mean_hi",
    "mean_path",
    "noise_mode",
    "tau_eta",
    "noise_shape",
    "noise_rate",
    "sampler",
    "step_size",
    "leapfrog_steps",
    "chains",
    "iterations",
    "burn_in",
    "thinning",
    "seed",
    "monitors",
    "obs_path",
    "truth_path",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MeanMode {
    Zero,
    Uniform { lo: f64, hi: f64 },
    /// `(m + n) x r` CSV: the rows of `M_a` followed by the rows of `M_b`.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    Fixed,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    Gibbs,
    Hmc { step_size: f64, leapfrog_steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// One precision per column, after broadcasting a scalar.
    pub tau_a: Vec<f64>,
    pub tau_b: Vec<f64>,
    pub mean_mode: MeanMode,
    pub noise_mode: NoiseMode,
    /// The fixed noise precision, or the chains' starting value under the Gamma prior.
    pub tau_eta: f64,
    pub noise_shape: f64,
    pub noise_rate: f64,
    pub sampler: SamplerKind,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub monitors: Vec<Monitor>,
    pub obs_path: Option<PathBuf>,
    pub truth_path: Option<PathBuf>,
    pub threads: Option<usize>,
}

struct Field {
    line: usize,
    value: String,
}

fn field_err(line: usize, key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("config line {line}, field `{key}`: {msg}"))
}

struct Fields {
    map: HashMap<String, Field>,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<&Field> {
        self.map.get(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(f) => f
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|e| field_err(f.line, key, format!("cannot parse {:?}: {e}", f.value))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| CliError::usage(format!("config: missing required field `{key}`")))
    }

    fn line(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |f| f.line)
    }

    fn precisions(&self, key: &str, rank: usize) -> CliResult<Vec<f64>> {
        let Some(f) = self.raw(key) else {
            return Ok(vec![1.0; rank]);
        };
        let values = f
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| field_err(f.line, key, e))?;
        let values = match values.len() {
            1 => vec![values[0]; rank],
            len if len == rank => values,
            len => return Err(field_err(f.line, key, format!("expected 1 or {rank} values, got {len}"))),
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(field_err(f.line, key, format!("precision {bad} must be positive")));
        }
        Ok(values)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {line}: expected `key = value`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::usage(format!("config line {line}: unknown key `{key}`")));
            }
            let previous = map.insert(
                key.to_string(),
                Field {
                    line,
                    value: value.trim().to_string(),
                },
            );
            if let Some(prev) = previous {
                return Err(field_err(line, key, format!("duplicate of line {}", prev.line)));
            }
        }
        let f = Fields { map };

        let m: usize = f.required("m")?;
        let n: usize = f.required("n")?;
        let rank: usize = f.required("rank")?;
        if m == 0 || n == 0 {
            return Err(CliError::usage("config: m and n must be positive"));
        }
        if rank == 0 || rank > m.min(n) {
            return Err(field_err(f.line("rank"), "rank", format!("must lie in 1..={}", m.min(n))));
        }
        let tau_a = f.precisions("tau_a", rank)?;
        let tau_b = f.precisions("tau_b", rank)?;

        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let mean_mode = match f.parse::<String>("mean_mode")?.as_deref().unwrap_or("zero") {
            "zero" => MeanMode::Zero,
            "uniform" => {
                let lo: f64 = f.parse("mean_lo")?.unwrap_or(0.0);
                let hi: f64 = f.parse("mean_hi")?.unwrap_or(1.0);
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(field_err(f.line("mean_hi"), "mean_hi", format!("need mean_lo {lo} < mean_hi {hi}")));
                }
                MeanMode::Uniform { lo, hi }
            }
            "file" => {
                let p: String = f
                    .parse("mean_path")?
                    .ok_or_else(|| field_err(f.line("mean_mode"), "mean_path", "required when mean_mode = file"))?;
                MeanMode::File(resolve(&p))
            }
            other => {
                return Err(field_err(
                    f.line("mean_mode"),
                    "mean_mode",
                    format!("{other:?} is not one of zero, uniform, file"),
                ))
            }
        };

        let noise_shape: f64 = f.parse("noise_shape")?.unwrap_or(3.0);
        let noise_rate: f64 = f.parse("noise_rate")?.unwrap_or(0.01);
        for (key, v) in [("noise_shape", noise_shape), ("noise_rate", noise_rate)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_err(f.line(key), key, format!("{v} must be positive")));
            }
        }
        let noise_mode = match f.parse::<String>("noise_mode")?.as_deref().unwrap_or("gamma") {
            "gamma" => NoiseMode::Gamma,
            "fixed" => NoiseMode::Fixed,
            other => {
                return Err(field_err(
                    f.line("noise_mode"),
                    "noise_mode",
                    format!("{other:?} is not one of fixed, gamma"),
                ))
            }
        };
        let tau_eta = match (noise_mode, f.parse::<f64>("tau_eta")?) {
            (_, Some(v)) => v,
            (NoiseMode::Gamma, None) => noise_shape / noise_rate,
            (NoiseMode::Fixed, None) => {
                return Err(CliError::usage("config: `tau_eta` is required when noise_mode = fixed"))
            }
        };
        if !(tau_eta.is_finite() && tau_eta > 0.0) {
            return Err(field_err(f.line("tau_eta"), "tau_eta", format!("{tau_eta} must be positive")));
        }

        let sampler = match f.parse::<String>("sampler")?.as_deref().unwrap_or("gibbs") {
            "gibbs" => SamplerKind::Gibbs,
            "hmc" => {
                let step_size = f.parse("step_size")?.unwrap_or(DEFAULT_STEP_SIZE);
                let leapfrog_steps = f.parse("leapfrog_steps")?.unwrap_or(DEFAULT_LEAPFROG_STEPS);
                if !(step_size.is_finite() && step_size > 0.0) {
                    return Err(field_err(f.line("step_size"), "step_size", "must be positive"));
                }
                if leapfrog_steps == 0 {
                    return Err(field_err(f.line("leapfrog_steps"), "leapfrog_steps", "must be at least 1"));
                }
                SamplerKind::Hmc {
                    step_size,
                    leapfrog_steps,
                }
            }
            other => {
                return Err(field_err(
                    f.line("sampler"),
                    "sampler",
                    format!("{other:?} is not one of gibbs, hmc"),
                ))
            }
        };

        let chains: usize = f.parse("chains")?.unwrap_or(1);
        let iterations: usize = f.parse("iterations")?.unwrap_or(1000);
        let burn_in: usize = f.parse("burn_in")?.unwrap_or(0);
        let thinning: usize = f.parse("thinning")?.unwrap_or(1);
        if chains == 0 {
            return Err(field_err(f.line("chains"), "chains", "must be at least 1"));
        }
        if iterations == 0 {
            return Err(field_err(f.line("iterations"), "iterations", "must be positive"));
        }
        if burn_in >= iterations {
            return Err(field_err(f.line("burn_in"), "burn_in", format!("must be below iterations {iterations}")));
        }
        if thinning == 0 {
            return Err(field_err(f.line("thinning"), "thinning", "must be at least 1"));
        }
        let threads: Option<usize> = f.parse("threads")?;
        if threads == Some(0) {
            return Err(field_err(f.line("threads"), "threads", "must be at least 1"));
        }

        let monitors = match f.raw("monitors") {
            None => vec![Monitor::A { row: 0, col: 0 }],
            Some(field) => parse_monitor_list(&field.value).map_err(|e| field_err(field.line, "monitors", e))?,
        };
        for mon in &monitors {
            let ok = match *mon {
                Monitor::A { row, col } => row < m && col < rank,
                Monitor::B { row, col } => row < n && col < rank,
                Monitor::NoisePrecision => true,
            };
            if !ok {
                return Err(field_err(
                    f.line("monitors"),
                    "monitors",
                    format!("{mon} is outside a {m}x{rank} A / {n}x{rank} B"),
                ));
            }
        }

        Ok(Self {
            m,
            n,
            rank,
            tau_a,
            tau_b,
            mean_mode,
            noise_mode,
            tau_eta,
            noise_shape,
            noise_rate,
            sampler,
            chains,
            iterations,
            burn_in,
            thinning,
            seed: f.parse("seed")?.unwrap_or(0),
            monitors,
            obs_path: f.parse::<String>("obs_path")?.map(|p| resolve(&p)),
            truth_path: f.parse::<String>("truth_path")?.map(|p| resolve(&p)),
            threads,
        })
    }

    /// Canonical text form; parsing it back yields an equal config when
    /// paths are absolute or relative to the same directory.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "rank = {}", self.rank);
        let _ = writeln!(s, "tau_a = {}", list(&self.tau_a));
        let _ = writeln!(s, "tau_b = {}", list(&self.tau_b));
        match &self.mean_mode {
            MeanMode::Zero => {
                let _ = writeln!(s, "mean_mode = zero");
            }
            MeanMode::Uniform { lo, hi } => {
                let _ = writeln!(s, "mean_mode = uniform\nmean_lo = {lo}\nmean_hi = {hi}");
            }
            MeanMode::File(p) => {
                let _ = writeln!(s, "mean_mode = file\nmean_path = {}", p.display());
            }
        }
        let mode = match self.noise_mode {
            NoiseMode::Fixed => "fixed",
            NoiseMode::Gamma => "gamma",
        };
        let _ = writeln!(s, "noise_mode = {mode}");
        let _ = writeln!(s, "tau_eta = {}", self.tau_eta);
        let _ = writeln!(s, "noise_shape = {}", self.noise_shape);
        let _ = writeln!(s, "noise_rate = {}", self.noise_rate);
        match self.sampler {
            SamplerKind::Gibbs => {
                let _ = writeln!(s, "sampler = gibbs");
            }
            SamplerKind::Hmc {
                step_size,
                leapfrog_steps,
            } => {
                let _ = writeln!(s, "sampler = hmc\nstep_size = {step_size}\nleapfrog_steps = {leapfrog_steps}");
            }
        }
        let _ = writeln!(s, "chains = {}", self.chains);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "thinning = {}", self.thinning);
        let _ = writeln!(s, "seed = {}", self.seed);
        let names: Vec<String> = self.monitors.iter().map(Monitor::to_string).collect();
        let _ = writeln!(s, "monitors = {}", names.join(", "));
        if let Some(p) = &self.obs_path {
            let _ = writeln!(s, "obs_path = {}", p.display());
        }
        if let Some(p) = &self.truth_path {
            let _ = writeln!(s, "truth_path = {}", p.display());
        }
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads = {t}");
        }
        s
    }
}

pub fn parse_monitor_list(text: &str) -> Result<Vec<Monitor>, String> {
    let monitors: Vec<Monitor> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Monitor>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if monitors.is_empty() {
        return Err("at least one monitor is required".into());
    }
    Ok(monitors)
}
