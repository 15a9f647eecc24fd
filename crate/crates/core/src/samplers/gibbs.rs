//! Blocked Gibbs sampler with conjugate row updates.
//!
//! Given `B` and `τ_η`, row `i` of `A` is Gaussian with
//!
//! ```text
//! precision  Λ_i = diag(τ_a) + τ_η Σ_{j ∈ cols(i)} b_j b_jᵀ
//! mean       Λ_i⁻¹ (diag(τ_a) m_{a,i} + τ_η Σ_{j ∈ cols(i)} y_ij b_j)
//! ```
//!
//! and symmetrically for the rows of `B`. The noise precision has a
//! `Gamma(shape + |Λ|/2, rate + SSE/2)` conditional.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{GibbsConfig, Monitor, Recorder};
use crate::diagnostics::ChainTrace;
use crate::error::{Error, Result};
use crate::model::{residual_sum_of_squares, FactorModel, FactorState, ObservationSet};
use crate::ChainRng;

/// Gaussian full conditional of one factor row.
#[derive(Debug, Clone)]
pub struct RowConditional {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RowConditional {
    fn build(
        prior_mean: DVector<f64>,
        prior_prec: &DVector<f64>,
        other: &DMatrix<f64>,
        noise_prec: f64,
        observed: impl Iterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let r = prior_prec.len();
        let mut precision = DMatrix::from_diagonal(prior_prec);
        let mut rhs = prior_prec.component_mul(&prior_mean);
        for (j, y) in observed {
            let v = other.row(j).transpose();
            precision.syger(noise_prec, &v, &v, 1.0);
            rhs.axpy(noise_prec * y, &v, 1.0);
        }
        precision.fill_upper_triangle_with_lower_triangle();
        let chol = Cholesky::new(precision.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(format!("row precision of rank {r}")))?;
        let mean = chol.solve(&rhs);
        Ok(Self { mean, precision, chol })
    }

    /// `mean + L⁻ᵀ z` with `Λ = L Lᵀ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + offset
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

fn check_inputs(model: &FactorModel, obs: &ObservationSet, state: &FactorState) -> Result<()> {
    state.check(model)?;
    if (obs.rows(), obs.cols()) != (model.rows(), model.cols()) {
        return Err(Error::ShapeMismatch {
            what: "observations",
            expected: format!("{}x{}", model.rows(), model.cols()),
            found: format!("{}x{}", obs.rows(), obs.cols()),
        });
    }
    Ok(())
}

fn conditional_a(model: &FactorModel, obs: &ObservationSet, state: &FactorState, i: usize) -> Result<RowConditional> {
    RowConditional::build(
        model.mean_a().row(i).transpose(),
        model.prec_a(),
        &state.b,
        state.noise_prec,
        obs.in_row(i).map(|e| (e.col, e.value)),
    )
}

fn conditional_b(model: &FactorModel, obs: &ObservationSet, state: &FactorState, j: usize) -> Result<RowConditional> {
    RowConditional::build(
        model.mean_b().row(j).transpose(),
        model.prec_b(),
        &state.a,
        state.noise_prec,
        obs.in_col(j).map(|e| (e.row, e.value)),
    )
}

/// Full conditional of row `i` of `A`.
pub fn row_conditional_a(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    row_index: usize,
) -> Result<RowConditional> {
    check_inputs(model, obs, state)?;
    if row_index >= model.rows() {
        return Err(Error::InvalidParameter(format!("row {row_index} out of range")));
    }
    conditional_a(model, obs, state, row_index)
}

/// Full conditional of row `j` of `B`.
pub fn row_conditional_b(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    col_index: usize,
) -> Result<RowConditional> {
    check_inputs(model, obs, state)?;
    if col_index >= model.cols() {
        return Err(Error::InvalidParameter(format!("column {col_index} out of range")));
    }
    conditional_b(model, obs, state, col_index)
}

/// Fresh draw of row `row_index` of `A` from its full conditional.
pub fn gibbs_row_update_a<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    row_index: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(row_conditional_a(model, obs, state, row_index)?.sample(rng))
}

/// Fresh draw of row `col_index` of `B` from its full conditional.
pub fn gibbs_row_update_b<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    col_index: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(row_conditional_b(model, obs, state, col_index)?.sample(rng))
}

/// Shape and rate of the Gamma conditional of `τ_η`.
pub fn noise_conditional(model: &FactorModel, obs: &ObservationSet, state: &FactorState) -> Result<(f64, f64)> {
    check_inputs(model, obs, state)?;
    let sse = residual_sum_of_squares(obs, &state.a, &state.b);
    Ok((
        model.noise_shape() + 0.5 * obs.len() as f64,
        model.noise_rate() + 0.5 * sse,
    ))
}

/// Draw of `τ_η` from its Gamma conditional (shape-rate, mean `shape / rate`).
pub fn gibbs_noise_update<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = noise_conditional(model, obs, state)?;
    let gamma = Gamma::new(shape, rate.recip())
        .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {rate}): {e}")))?;
    // Gamma draws can underflow to 0 for tiny shapes; keep the state valid
    Ok(gamma.sample(rng).max(f64::MIN_POSITIVE))
}

/// One systematic sweep: rows of `A` ascending, rows of `B` ascending, then `τ_η`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &mut FactorState,
    sample_noise_precision: bool,
    rng: &mut R,
) -> Result<()> {
    check_inputs(model, obs, state)?;
    for i in 0..model.rows() {
        let row = conditional_a(model, obs, state, i)?.sample(rng);
        state.a.row_mut(i).tr_copy_from(&row);
    }
    for j in 0..model.cols() {
        let row = conditional_b(model, obs, state, j)?.sample(rng);
        state.b.row_mut(j).tr_copy_from(&row);
    }
    if sample_noise_precision {
        state.noise_prec = gibbs_noise_update(model, obs, state, rng)?;
    }
    Ok(())
}

/// Runs a Gibbs chain from `init`, recording `monitors` after burn-in every
/// `thinning` iterations.
pub fn run_gibbs_chain(
    model: &FactorModel,
    obs: &ObservationSet,
    config: &GibbsConfig,
    init: FactorState,
    monitors: &[Monitor],
) -> Result<ChainTrace> {
    use rand::SeedableRng;

    config.validate()?;
    check_inputs(model, obs, &init)?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut recorder = Recorder::new(model, monitors, config.burn_in, config.thinning)?;
    let mut state = init;
    for iter in 1..=config.iterations {
        gibbs_sweep(model, obs, &mut state, config.sample_noise_precision, &mut rng)?;
        recorder.observe(iter, &state);
    }
    Ok(recorder.finish(None, 0))
}
