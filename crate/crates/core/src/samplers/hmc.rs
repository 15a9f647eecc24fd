//! Hamiltonian Monte Carlo over `(A, B)` with identity mass; `τ_η` is held
//! fixed during a trajectory and refreshed by its Gibbs conditional afterwards.

use nalgebra::DMatrix;
use rand::Rng;

use super::gibbs::gibbs_noise_update;
use super::{HmcConfig, Monitor, Recorder};
use crate::diagnostics::ChainTrace;
use crate::error::{Error, Result};
use crate::linalg::gaussian_matrix;
use crate::model::{grad_unchecked, log_density_at, FactorModel, FactorState, ObservationSet};
use crate::ChainRng;

/// Position `(A, B)` and conjugate momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub pa: DMatrix<f64>,
    pub pb: DMatrix<f64>,
}

impl Phase {
    pub fn negate_momentum(&mut self) {
        self.pa.neg_mut();
        self.pb.neg_mut();
    }
}

/// `H = −log p(A, B | y, τ_η) + ½ ‖p‖²`.
pub fn hamiltonian(model: &FactorModel, obs: &ObservationSet, phase: &Phase, noise_prec: f64) -> f64 {
    let kinetic = 0.5 * (phase.pa.norm_squared() + phase.pb.norm_squared());
    kinetic - log_density_at(model, obs, &phase.a, &phase.b, noise_prec)
}

fn check_phase(model: &FactorModel, obs: &ObservationSet, phase: &Phase, noise_prec: f64) -> Result<()> {
    let (m, n, r) = (model.rows(), model.cols(), model.rank());
    if phase.a.shape() != (m, r) || phase.pa.shape() != (m, r) || phase.b.shape() != (n, r) || phase.pb.shape() != (n, r) {
        return Err(Error::ShapeMismatch {
            what: "phase",
            expected: format!("A,pA {m}x{r}; B,pB {n}x{r}"),
            found: format!(
                "A {:?}, pA {:?}, B {:?}, pB {:?}",
                phase.a.shape(),
                phase.pa.shape(),
                phase.b.shape(),
                phase.pb.shape()
            ),
        });
    }
    if (obs.rows(), obs.cols()) != (m, n) {
        return Err(Error::ShapeMismatch {
            what: "observations",
            expected: format!("{m}x{n}"),
            found: format!("{}x{}", obs.rows(), obs.cols()),
        });
    }
    if !(noise_prec.is_finite() && noise_prec > 0.0) {
        return Err(Error::ContractViolation(format!("noise precision {noise_prec} must be positive")));
    }
    Ok(())
}

/// `steps` leapfrog (velocity Verlet) steps of size `step_size`.
pub fn leapfrog(
    model: &FactorModel,
    obs: &ObservationSet,
    phase: &mut Phase,
    noise_prec: f64,
    step_size: f64,
    steps: usize,
) -> Result<()> {
    check_phase(model, obs, phase, noise_prec)?;
    let half = 0.5 * step_size;
    let (mut ga, mut gb) = grad_unchecked(model, obs, &phase.a, &phase.b, noise_prec);
    for _ in 0..steps {
        phase.pa += &ga * half;
        phase.pb += &gb * half;
        phase.a += &phase.pa * step_size;
        phase.b += &phase.pb * step_size;
        (ga, gb) = grad_unchecked(model, obs, &phase.a, &phase.b, noise_prec);
        phase.pa += &ga * half;
        phase.pb += &gb * half;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcTransition {
    pub state: FactorState,
    pub accepted: bool,
    /// The proposal's Hamiltonian was NaN or infinite and was rejected.
    pub non_finite: bool,
    /// `H(proposal) − H(current)`.
    pub energy_error: f64,
}

/// One HMC transition followed, when enabled, by a Gibbs refresh of `τ_η`.
pub fn hmc_step<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    config: &HmcConfig,
    rng: &mut R,
) -> Result<HmcTransition> {
    config.validate()?;
    state.check(model)?;
    let tau = state.noise_prec;
    let mut phase = Phase {
        a: state.a.clone(),
        b: state.b.clone(),
        pa: gaussian_matrix(model.rows(), model.rank(), rng),
        pb: gaussian_matrix(model.cols(), model.rank(), rng),
    };
    let h0 = hamiltonian(model, obs, &phase, tau);
    leapfrog(model, obs, &mut phase, tau, config.step_size, config.leapfrog_steps)?;
    let h1 = hamiltonian(model, obs, &phase, tau);
    let energy_error = h1 - h0;
    let non_finite = !energy_error.is_finite() || phase.a.iter().chain(phase.b.iter()).any(|v| !v.is_finite());
    let u: f64 = rng.random();
    let accepted = !non_finite && u.ln() < -energy_error;

    let mut next = if accepted {
        FactorState {
            a: phase.a,
            b: phase.b,
            noise_prec: tau,
        }
    } else {
        state.clone()
    };
    if config.sample_noise_precision {
        next.noise_prec = gibbs_noise_update(model, obs, &next, rng)?;
    }
    Ok(HmcTransition {
        state: next,
        accepted,
        non_finite,
        energy_error,
    })
}

/// Runs an HMC chain; the trace carries the acceptance rate over all iterations.
pub fn run_hmc_chain(
    model: &FactorModel,
    obs: &ObservationSet,
    config: &HmcConfig,
    init: FactorState,
    monitors: &[Monitor],
) -> Result<ChainTrace> {
    use rand::SeedableRng;

    config.validate()?;
    init.check(model)?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut recorder = Recorder::new(model, monitors, config.burn_in, config.thinning)?;
    let mut state = init;
    let mut accepted = 0usize;
    let mut non_finite = 0usize;
    for iter in 1..=config.iterations {
        let t = hmc_step(model, obs, &state, config, &mut rng)?;
        accepted += t.accepted as usize;
        non_finite += t.non_finite as usize;
        state = t.state;
        recorder.observe(iter, &state);
    }
    let rate = accepted as f64 / config.iterations as f64;
    Ok(recorder.finish(Some(rate), non_finite))
}
