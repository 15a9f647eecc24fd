//! Markov-chain kernels over `(A, B, τ_η)`.
//!
//! Both samplers are deterministic given their seed: the per-chain generator
//! is a ChaCha8 stream seeded from the configured 64-bit seed.

mod gibbs;
mod hmc;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub use gibbs::{
    gibbs_noise_update, gibbs_row_update_a, gibbs_row_update_b, gibbs_sweep, noise_conditional,
    row_conditional_a, row_conditional_b, run_gibbs_chain, RowConditional,
};
pub use hmc::{hamiltonian, hmc_step, leapfrog, run_hmc_chain, HmcTransition, Phase};

use crate::diagnostics::ChainTrace;
use crate::error::{Error, Result};
use crate::model::{FactorModel, FactorState};

pub const DEFAULT_STEP_SIZE: f64 = 0.005;
pub const DEFAULT_LEAPFROG_STEPS: usize = 20;

fn validate_schedule(iterations: usize, burn_in: usize, thinning: usize) -> Result<()> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be positive".into()));
    }
    if burn_in >= iterations {
        return Err(Error::InvalidParameter(format!(
            "burn_in {burn_in} must be below iterations {iterations}"
        )));
    }
    if thinning == 0 {
        return Err(Error::InvalidParameter("thinning must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub sample_noise_precision: bool,
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(self.iterations, self.burn_in, self.thinning)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub sample_noise_precision: bool,
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(self.iterations, self.burn_in, self.thinning)?;
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step_size {} must be positive",
                self.step_size
            )));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::InvalidParameter("leapfrog_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// A scalar of the chain state to record, e.g. `A[0][0]`, `B[49][3]`, `tau_eta`.
/// Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Monitor {
    A { row: usize, col: usize },
    B { row: usize, col: usize },
    NoisePrecision,
}

impl Monitor {
    pub fn read(&self, state: &FactorState) -> f64 {
        match *self {
            Monitor::A { row, col } => state.a[(row, col)],
            Monitor::B { row, col } => state.b[(row, col)],
            Monitor::NoisePrecision => state.noise_prec,
        }
    }

    pub fn check(&self, model: &FactorModel) -> Result<()> {
        let ok = match *self {
            Monitor::A { row, col } => row < model.rows() && col < model.rank(),
            Monitor::B { row, col } => row < model.cols() && col < model.rank(),
            Monitor::NoisePrecision => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("monitor {self} is outside the model")))
        }
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monitor::A { row, col } => write!(f, "A[{row}][{col}]"),
            Monitor::B { row, col } => write!(f, "B[{row}][{col}]"),
            Monitor::NoisePrecision => f.write_str("tau_eta"),
        }
    }
}

impl FromStr for Monitor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "tau_eta" {
            return Ok(Monitor::NoisePrecision);
        }
        let bad = || Error::InvalidParameter(format!("cannot parse monitor {s:?}"));
        let (which, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let rest = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
        let (row, col) = rest.split_once("][").ok_or_else(bad)?;
        let row: usize = row.parse().map_err(|_| bad())?;
        let col: usize = col.parse().map_err(|_| bad())?;
        match which {
            "A" => Ok(Monitor::A { row, col }),
            "B" => Ok(Monitor::B { row, col }),
            _ => Err(bad()),
        }
    }
}

/// Draws every column of `A` and `B` from its prior Gaussian; `τ_η = noise_init`.
pub fn init_from_prior<R: Rng + ?Sized>(model: &FactorModel, rng: &mut R, noise_init: f64) -> Result<FactorState> {
    if !(noise_init.is_finite() && noise_init > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "initial noise precision {noise_init} must be positive"
        )));
    }
    let draw = |mean: &DMatrix<f64>, prec: &nalgebra::DVector<f64>, rng: &mut R| {
        let mut out = mean.clone();
        for k in 0..out.ncols() {
            let sd = prec[k].sqrt().recip();
            for v in out.column_mut(k).iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        out
    };
    let a = draw(model.mean_a(), model.prec_a(), rng);
    let b = draw(model.mean_b(), model.prec_b(), rng);
    FactorState::new(a, b, noise_init)
}

/// Collects retained samples and the running reconstruction sum.
struct Recorder {
    monitors: Vec<Monitor>,
    burn_in: usize,
    thinning: usize,
    iterations: Vec<usize>,
    samples: Vec<Vec<f64>>,
    recon_sum: DMatrix<f64>,
}

impl Recorder {
    fn new(model: &FactorModel, monitors: &[Monitor], burn_in: usize, thinning: usize) -> Result<Self> {
        for m in monitors {
            m.check(model)?;
        }
        Ok(Self {
            monitors: monitors.to_vec(),
            burn_in,
            thinning,
            iterations: Vec::new(),
            samples: vec![Vec::new(); monitors.len()],
            recon_sum: DMatrix::zeros(model.rows(), model.cols()),
        })
    }

    /// `iter` is 1-based.
    fn observe(&mut self, iter: usize, state: &FactorState) {
        if iter <= self.burn_in || !(iter - self.burn_in).is_multiple_of(self.thinning) {
            return;
        }
        self.iterations.push(iter);
        for (series, m) in self.samples.iter_mut().zip(&self.monitors) {
            series.push(m.read(state));
        }
        self.recon_sum += &state.a * state.b.transpose();
    }

    fn finish(self, acceptance_rate: Option<f64>, non_finite_rejections: usize) -> ChainTrace {
        let count = self.iterations.len().max(1) as f64;
        ChainTrace {
            monitor_names: self.monitors.iter().map(|m| m.to_string()).collect(),
            iterations: self.iterations,
            samples: self.samples,
            recon_mean: self.recon_sum / count,
            acceptance_rate,
            non_finite_rejections,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChainRng;
    use nalgebra::DVector;
    use rand::SeedableRng;

    #[test]
    fn monitor_names_round_trip() {
        for s in ["A[0][0]", "B[49][3]", "tau_eta"] {
            assert_eq!(s.parse::<Monitor>().unwrap().to_string(), s);
        }
        for bad in ["C[0][0]", "A[0]", "A[x][1]", "", "A0][0]"] {
            assert!(bad.parse::<Monitor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn schedule_validation() {
        let mut cfg = GibbsConfig {
            iterations: 10,
            burn_in: 10,
            thinning: 1,
            seed: 0,
            sample_noise_precision: true,
        };
        assert!(cfg.validate().is_err());
        cfg.burn_in = 9;
        assert!(cfg.validate().is_ok());
        cfg.thinning = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn prior_draws_concentrate() {
        let model = FactorModel::zero_mean(3, 4, DVector::from_element(2, 1e12), DVector::from_element(2, 1e12), 1.0, 1.0).unwrap();
        let mut rng = ChainRng::seed_from_u64(1);
        let s = init_from_prior(&model, &mut rng, 2.0).unwrap();
        assert!(s.a.iter().chain(s.b.iter()).all(|v| v.abs() < 1e-5));
        assert_eq!(s.noise_prec, 2.0);
    }

    #[test]
    fn prior_draws_deterministic() {
        let model = FactorModel::zero_mean(3, 4, DVector::from_element(2, 1.0), DVector::from_element(2, 2.0), 1.0, 1.0).unwrap();
        let s1 = init_from_prior(&model, &mut ChainRng::seed_from_u64(9), 1.0).unwrap();
        let s2 = init_from_prior(&model, &mut ChainRng::seed_from_u64(9), 1.0).unwrap();
        assert_eq!(s1, s2);
        assert!(init_from_prior(&model, &mut ChainRng::seed_from_u64(9), 0.0).is_err());
    }

    #[test]
    fn prior_draw_mean_matches_means() {
        let mean_a = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        let mean_b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 3.0]);
        let prec = DVector::from_vec(vec![4.0, 0.25]);
        let model = FactorModel::new(mean_a.clone(), mean_b, prec.clone(), prec.clone(), 1.0, 1.0).unwrap();
        let mut rng = ChainRng::seed_from_u64(17);
        let draws = 10_000;
        let mut sum = DMatrix::zeros(2, 2);
        for _ in 0..draws {
            sum += init_from_prior(&model, &mut rng, 1.0).unwrap().a;
        }
        let avg = sum / draws as f64;
        for k in 0..2 {
            let se = 1.0 / (prec[k].sqrt() * (draws as f64).sqrt());
            for i in 0..2 {
                assert!((avg[(i, k)] - mean_a[(i, k)]).abs() < 3.0 * se);
            }
        }
    }
}
