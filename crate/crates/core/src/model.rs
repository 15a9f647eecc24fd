//! Probability model: column-wise Gaussian priors on the factors, Gaussian
//! observation noise with a Gamma prior on its precision, and the resulting
//! log-posterior and gradient.
//!
//! All normalization constants are kept (2π powers, precision logs, the Gamma
//! normalizer); only the evidence `p(y)` is dropped, so values are comparable
//! across states for a fixed model and data set.

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior specification of a rank-`r` factorization of an `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    mean_a: DMatrix<f64>,
    mean_b: DMatrix<f64>,
    prec_a: DVector<f64>,
    prec_b: DVector<f64>,
    noise_shape: f64,
    noise_rate: f64,
}

fn check_precisions(label: &str, prec: &DVector<f64>) -> Result<()> {
    for (k, &t) in prec.iter().enumerate() {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{label}[{k}] = {t} must be positive and finite"
            )));
        }
    }
    Ok(())
}

impl FactorModel {
    /// `mean_a` is `m x r` (column `k` is the prior mean of `a_k`), `mean_b` is `n x r`.
    /// The noise precision prior is `Gamma(shape, rate)` with mean `shape / rate`.
    pub fn new(
        mean_a: DMatrix<f64>,
        mean_b: DMatrix<f64>,
        prec_a: DVector<f64>,
        prec_b: DVector<f64>,
        noise_shape: f64,
        noise_rate: f64,
    ) -> Result<Self> {
        let r = mean_a.ncols();
        if r == 0 || mean_a.nrows() == 0 || mean_b.nrows() == 0 {
            return Err(Error::InvalidParameter("dimensions and rank must be positive".into()));
        }
        if mean_b.ncols() != r {
            return Err(shape_err("mean_b", (mean_b.nrows(), r), mean_b.shape()));
        }
        if r > mean_a.nrows().min(mean_b.nrows()) {
            return Err(Error::InvalidParameter(format!(
                "rank {r} exceeds min(m, n) = {}",
                mean_a.nrows().min(mean_b.nrows())
            )));
        }
        if prec_a.len() != r {
            return Err(shape_err("prec_a", (r, 1), (prec_a.len(), 1)));
        }
        if prec_b.len() != r {
            return Err(shape_err("prec_b", (r, 1), (prec_b.len(), 1)));
        }
        check_precisions("prec_a", &prec_a)?;
        check_precisions("prec_b", &prec_b)?;
        if !mean_a.iter().chain(mean_b.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("prior means must be finite".into()));
        }
        for (label, v) in [("noise_shape", noise_shape), ("noise_rate", noise_rate)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{label} = {v} must be positive")));
            }
        }
        Ok(Self {
            mean_a,
            mean_b,
            prec_a,
            prec_b,
            noise_shape,
            noise_rate,
        })
    }

    /// Zero prior means on both factors.
    pub fn zero_mean(
        m: usize,
        n: usize,
        prec_a: DVector<f64>,
        prec_b: DVector<f64>,
        noise_shape: f64,
        noise_rate: f64,
    ) -> Result<Self> {
        let r = prec_a.len();
        Self::new(
            DMatrix::zeros(m, r),
            DMatrix::zeros(n, r),
            prec_a,
            prec_b,
            noise_shape,
            noise_rate,
        )
    }

    /// Same precisions and noise prior, different prior means.
    pub fn with_means(&self, mean_a: DMatrix<f64>, mean_b: DMatrix<f64>) -> Result<Self> {
        if mean_a.shape() != self.mean_a.shape() {
            return Err(shape_err("mean_a", self.mean_a.shape(), mean_a.shape()));
        }
        if mean_b.shape() != self.mean_b.shape() {
            return Err(shape_err("mean_b", self.mean_b.shape(), mean_b.shape()));
        }
        Self::new(
            mean_a,
            mean_b,
            self.prec_a.clone(),
            self.prec_b.clone(),
            self.noise_shape,
            self.noise_rate,
        )
    }

    pub fn rows(&self) -> usize {
        self.mean_a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mean_b.nrows()
    }

    pub fn rank(&self) -> usize {
        self.mean_a.ncols()
    }

    pub fn mean_a(&self) -> &DMatrix<f64> {
        &self.mean_a
    }

    pub fn mean_b(&self) -> &DMatrix<f64> {
        &self.mean_b
    }

    pub fn prec_a(&self) -> &DVector<f64> {
        &self.prec_a
    }

    pub fn prec_b(&self) -> &DVector<f64> {
        &self.prec_b
    }

    pub fn noise_shape(&self) -> f64 {
        self.noise_shape
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
    }
}

/// One observed entry `y_(row, col)`; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse coordinate list of observed entries, sorted by `(row, col)`, with
/// per-row and per-column groupings for the conditional updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    m: usize,
    n: usize,
    entries: Vec<Observation>,
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
}

impl ObservationSet {
    pub fn new(m: usize, n: usize, mut entries: Vec<Observation>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
        }
        for e in &entries {
            if e.row >= m || e.col >= n {
                return Err(Error::IndexOutOfRange {
                    row: e.row,
                    col: e.col,
                    m,
                    n,
                });
            }
            if !e.value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "observation ({}, {}) is not finite",
                    e.row, e.col
                )));
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col))
        {
            return Err(Error::DuplicateObservation {
                row: w[0].row,
                col: w[0].col,
            });
        }
        let mut by_row = vec![Vec::new(); m];
        let mut by_col = vec![Vec::new(); n];
        for (idx, e) in entries.iter().enumerate() {
            by_row[e.row].push(idx);
            by_col[e.col].push(idx);
        }
        Ok(Self {
            m,
            n,
            entries,
            by_row,
            by_col,
        })
    }

    pub fn empty(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, Vec::new())
    }

    /// Every entry of `x` observed.
    pub fn fully_observed(x: &DMatrix<f64>) -> Result<Self> {
        let entries = (0..x.nrows())
            .flat_map(|i| {
                (0..x.ncols()).map(move |j| Observation {
                    row: i,
                    col: j,
                    value: x[(i, j)],
                })
            })
            .collect();
        Self::new(x.nrows(), x.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Observations in row `i`, ascending by column.
    pub fn in_row(&self, i: usize) -> impl Iterator<Item = &Observation> + '_ {
        self.by_row[i].iter().map(move |&k| &self.entries[k])
    }

    /// Observations in column `j`, ascending by row.
    pub fn in_col(&self, j: usize) -> impl Iterator<Item = &Observation> + '_ {
        self.by_col[j].iter().map(move |&k| &self.entries[k])
    }
}

/// Current point `(A, B, τ_η)` of a Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub noise_prec: f64,
}

impl FactorState {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, noise_prec: f64) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(shape_err("b", (b.nrows(), a.ncols()), b.shape()));
        }
        if !(noise_prec.is_finite() && noise_prec > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise precision {noise_prec} must be positive"
            )));
        }
        Ok(Self { a, b, noise_prec })
    }

    pub(crate) fn check(&self, model: &FactorModel) -> Result<()> {
        let (m, n, r) = (model.rows(), model.cols(), model.rank());
        if self.a.shape() != (m, r) {
            return Err(shape_err("state.a", (m, r), self.a.shape()));
        }
        if self.b.shape() != (n, r) {
            return Err(shape_err("state.b", (n, r), self.b.shape()));
        }
        if !(self.noise_prec.is_finite() && self.noise_prec > 0.0) {
            return Err(Error::ContractViolation(format!(
                "noise precision {} must be positive",
                self.noise_prec
            )));
        }
        Ok(())
    }
}

/// Whether the Gamma prior on `τ_η` contributes to the log-posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseTerm {
    /// `τ_η` is inferred; include its Gamma log-prior.
    Hierarchical,
    /// `τ_η` is a fixed constant; no prior term.
    Fixed,
}

/// The additive pieces of the log-posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorTerms {
    pub prior_a: f64,
    pub prior_b: f64,
    pub prior_noise: f64,
    pub likelihood: f64,
}

impl PosteriorTerms {
    pub fn total(&self, noise: NoiseTerm) -> f64 {
        let base = self.prior_a + self.prior_b + self.likelihood;
        match noise {
            NoiseTerm::Hierarchical => base + self.prior_noise,
            NoiseTerm::Fixed => base,
        }
    }
}

fn check_obs(model: &FactorModel, obs: &ObservationSet) -> Result<()> {
    if (obs.rows(), obs.cols()) != (model.rows(), model.cols()) {
        return Err(shape_err(
            "observations",
            (model.rows(), model.cols()),
            (obs.rows(), obs.cols()),
        ));
    }
    Ok(())
}

fn column_gaussian_log_prior(x: &DMatrix<f64>, mean: &DMatrix<f64>, prec: &DVector<f64>) -> f64 {
    let rows = x.nrows() as f64;
    (0..x.ncols())
        .map(|k| {
            let sq = (x.column(k) - mean.column(k)).norm_squared();
            0.5 * rows * (prec[k].ln() - LN_2PI) - 0.5 * prec[k] * sq
        })
        .sum()
}

/// Column-wise Gaussian log-prior of `A`.
pub fn log_prior_a(model: &FactorModel, a: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != model.mean_a.shape() {
        return Err(shape_err("a", model.mean_a.shape(), a.shape()));
    }
    Ok(column_gaussian_log_prior(a, &model.mean_a, &model.prec_a))
}

/// Column-wise Gaussian log-prior of `B`.
pub fn log_prior_b(model: &FactorModel, b: &DMatrix<f64>) -> Result<f64> {
    if b.shape() != model.mean_b.shape() {
        return Err(shape_err("b", model.mean_b.shape(), b.shape()));
    }
    Ok(column_gaussian_log_prior(b, &model.mean_b, &model.prec_b))
}

/// Gamma(shape, rate) log-density of the noise precision.
pub fn log_prior_noise(model: &FactorModel, noise_prec: f64) -> f64 {
    let (k, rate) = (model.noise_shape, model.noise_rate);
    k * rate.ln() - libm::lgamma(k) + (k - 1.0) * noise_prec.ln() - rate * noise_prec
}

/// Sum of squared residuals `Σ (y − ā_iᵀ b̄_j)²` over the observed entries.
pub fn residual_sum_of_squares(obs: &ObservationSet, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    obs.entries()
        .iter()
        .map(|e| {
            let resid = e.value - a.row(e.row).dot(&b.row(e.col));
            resid * resid
        })
        .sum()
}

fn gaussian_log_likelihood(obs: &ObservationSet, a: &DMatrix<f64>, b: &DMatrix<f64>, noise_prec: f64) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let count = obs.len() as f64;
    0.5 * count * (noise_prec.ln() - LN_2PI) - 0.5 * noise_prec * residual_sum_of_squares(obs, a, b)
}

/// Gaussian log-likelihood of the observed entries under `X = A Bᵀ`.
pub fn log_likelihood(model: &FactorModel, obs: &ObservationSet, state: &FactorState) -> Result<f64> {
    check_obs(model, obs)?;
    state.check(model)?;
    Ok(gaussian_log_likelihood(obs, &state.a, &state.b, state.noise_prec))
}

pub fn posterior_terms(model: &FactorModel, obs: &ObservationSet, state: &FactorState) -> Result<PosteriorTerms> {
    check_obs(model, obs)?;
    state.check(model)?;
    Ok(PosteriorTerms {
        prior_a: column_gaussian_log_prior(&state.a, &model.mean_a, &model.prec_a),
        prior_b: column_gaussian_log_prior(&state.b, &model.mean_b, &model.prec_b),
        prior_noise: log_prior_noise(model, state.noise_prec),
        likelihood: gaussian_log_likelihood(obs, &state.a, &state.b, state.noise_prec),
    })
}

/// `log p(A, B, τ_η | y)` up to the evidence.
pub fn log_posterior(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
    noise: NoiseTerm,
) -> Result<f64> {
    Ok(posterior_terms(model, obs, state)?.total(noise))
}

/// Log-density of `(A, B)` at fixed `τ_η` without the noise prior. Shapes are
/// the caller's responsibility.
pub(crate) fn log_density_at(
    model: &FactorModel,
    obs: &ObservationSet,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    noise_prec: f64,
) -> f64 {
    column_gaussian_log_prior(a, &model.mean_a, &model.prec_a)
        + column_gaussian_log_prior(b, &model.mean_b, &model.prec_b)
        + gaussian_log_likelihood(obs, a, b, noise_prec)
}

/// Gradient of the log-posterior with respect to `(A, B)` at fixed `τ_η`.
pub fn grad_log_posterior(
    model: &FactorModel,
    obs: &ObservationSet,
    state: &FactorState,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    state.check(model)?;
    grad_log_posterior_at(model, obs, &state.a, &state.b, state.noise_prec)
}

/// Gradient at an explicit noise precision. `noise_prec = 0` switches the
/// likelihood off and leaves the prior gradient `−(A − M_a) diag(τ_a)`.
pub fn grad_log_posterior_at(
    model: &FactorModel,
    obs: &ObservationSet,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    noise_prec: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_obs(model, obs)?;
    if a.shape() != model.mean_a.shape() {
        return Err(shape_err("a", model.mean_a.shape(), a.shape()));
    }
    if b.shape() != model.mean_b.shape() {
        return Err(shape_err("b", model.mean_b.shape(), b.shape()));
    }
    if !(noise_prec.is_finite() && noise_prec >= 0.0) {
        return Err(Error::ContractViolation(format!(
            "noise precision {noise_prec} must be non-negative"
        )));
    }
    Ok(grad_unchecked(model, obs, a, b, noise_prec))
}

pub(crate) fn grad_unchecked(
    model: &FactorModel,
    obs: &ObservationSet,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    noise_prec: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut ga = &model.mean_a - a;
    for (k, mut col) in ga.column_iter_mut().enumerate() {
        col *= model.prec_a[k];
    }
    let mut gb = &model.mean_b - b;
    for (k, mut col) in gb.column_iter_mut().enumerate() {
        col *= model.prec_b[k];
    }
    if noise_prec > 0.0 {
        let r = a.ncols();
        for e in obs.entries() {
            let scaled = noise_prec * (e.value - a.row(e.row).dot(&b.row(e.col)));
            for k in 0..r {
                ga[(e.row, k)] += scaled * b[(e.col, k)];
                gb[(e.col, k)] += scaled * a[(e.row, k)];
            }
        }
    }
    (ga, gb)
}

/// Posterior-predictive matrix `A Bᵀ`.
pub fn reconstruct(state: &FactorState) -> DMatrix<f64> {
    &state.a * state.b.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    fn scalar_model() -> FactorModel {
        FactorModel::zero_mean(1, 1, dvector![1.0], dvector![1.0], 3.0, 0.01).unwrap()
    }

    fn scalar_obs() -> ObservationSet {
        ObservationSet::new(
            1,
            1,
            vec![Observation {
                row: 0,
                col: 0,
                value: 2.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn scalar_likelihood_hand_value() {
        let state = FactorState::new(dmatrix![1.0], dmatrix![2.0], 1.0).unwrap();
        let ll = log_likelihood(&scalar_model(), &scalar_obs(), &state).unwrap();
        let expected = 0.5 * (1.0 / (2.0 * std::f64::consts::PI)).ln();
        assert!((ll - expected).abs() < 1e-15);
        assert!((ll + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn empty_observations_give_zero_likelihood() {
        let state = FactorState::new(dmatrix![1.0], dmatrix![2.0], 3.0).unwrap();
        let obs = ObservationSet::empty(1, 1).unwrap();
        assert_eq!(log_likelihood(&scalar_model(), &obs, &state).unwrap(), 0.0);
    }

    #[test]
    fn scalar_posterior_hand_value() {
        let state = FactorState::new(dmatrix![1.0], dmatrix![2.0], 1.0).unwrap();
        let lp = log_posterior(&scalar_model(), &scalar_obs(), &state, NoiseTerm::Fixed).unwrap();
        let ln = (1.0 / (2.0 * std::f64::consts::PI)).ln();
        assert!((lp - (1.5 * ln - 0.5 - 2.0)).abs() < 1e-14);
        assert!((lp + 5.256_815_6).abs() < 1e-7);
    }

    #[test]
    fn hierarchical_adds_gamma_term() {
        let model = scalar_model();
        let state = FactorState::new(dmatrix![1.0], dmatrix![2.0], 250.0).unwrap();
        let t = posterior_terms(&model, &scalar_obs(), &state).unwrap();
        // Gamma(3, 0.01) density at 250: rate^3 x^2 e^{-rate x} / Γ(3)
        let expected = (0.01f64.powi(3) * 250.0f64.powi(2) * (-2.5f64).exp() / 2.0).ln();
        assert!((t.prior_noise - expected).abs() < 1e-12);
        let diff = t.total(NoiseTerm::Hierarchical) - t.total(NoiseTerm::Fixed);
        assert_eq!(diff, t.prior_noise);
    }

    #[test]
    fn terms_sum_to_posterior() {
        let model = FactorModel::new(
            dmatrix![0.5, -0.2; 0.1, 0.3; 0.0, 1.0],
            dmatrix![1.0, 0.0; -1.0, 0.4],
            dvector![1.5, 0.7],
            dvector![2.0, 0.3],
            2.0,
            0.5,
        )
        .unwrap();
        let obs = ObservationSet::new(
            3,
            2,
            vec![
                Observation { row: 2, col: 1, value: 0.3 },
                Observation { row: 0, col: 0, value: -1.2 },
            ],
        )
        .unwrap();
        let state = FactorState::new(
            dmatrix![0.1, 0.2; 0.3, -0.4; 1.0, 0.0],
            dmatrix![0.5, 0.5; -0.3, 0.9],
            4.0,
        )
        .unwrap();
        let t = posterior_terms(&model, &obs, &state).unwrap();
        assert_eq!(t.prior_a, log_prior_a(&model, &state.a).unwrap());
        assert_eq!(t.prior_b, log_prior_b(&model, &state.b).unwrap());
        assert_eq!(t.likelihood, log_likelihood(&model, &obs, &state).unwrap());
        let lp = log_posterior(&model, &obs, &state, NoiseTerm::Hierarchical).unwrap();
        assert_eq!(lp, t.prior_a + t.prior_b + t.likelihood + t.prior_noise);
    }

    #[test]
    fn prior_mode_has_zero_gradient() {
        let model = FactorModel::new(
            dmatrix![0.5, -0.2; 0.1, 0.3],
            dmatrix![1.0, 0.0; -1.0, 0.4],
            dvector![1.5, 0.7],
            dvector![2.0, 0.3],
            2.0,
            0.5,
        )
        .unwrap();
        let obs = ObservationSet::empty(2, 2).unwrap();
        let state = FactorState::new(model.mean_a().clone(), model.mean_b().clone(), 1.0).unwrap();
        let (ga, gb) = grad_log_posterior(&model, &obs, &state).unwrap();
        assert!(ga.iter().chain(gb.iter()).all(|&g| g == 0.0));
    }

    #[test]
    fn zero_noise_precision_leaves_prior_gradient() {
        let model = FactorModel::new(
            dmatrix![0.5, -0.2; 0.1, 0.3],
            dmatrix![1.0, 0.0; -1.0, 0.4],
            dvector![1.5, 0.7],
            dvector![2.0, 0.3],
            2.0,
            0.5,
        )
        .unwrap();
        let obs = ObservationSet::fully_observed(&dmatrix![1.0, 2.0; 3.0, 4.0]).unwrap();
        let a = dmatrix![1.0, 1.0; -1.0, 2.0];
        let b = dmatrix![0.0, 1.0; 2.0, 0.5];
        let (ga, gb) = grad_log_posterior_at(&model, &obs, &a, &b, 0.0).unwrap();
        let expected_a = (model.mean_a() - &a) * nalgebra::DMatrix::from_diagonal(model.prec_a());
        let expected_b = (model.mean_b() - &b) * nalgebra::DMatrix::from_diagonal(model.prec_b());
        assert!((ga - expected_a).abs().max() < 1e-15);
        assert!((gb - expected_b).abs().max() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let model = scalar_model();
        let state = FactorState::new(dmatrix![1.0, 2.0], dmatrix![2.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            log_likelihood(&model, &scalar_obs(), &state),
            Err(Error::ShapeMismatch { .. })
        ));
        let wrong_obs = ObservationSet::empty(2, 1).unwrap();
        let ok_state = FactorState::new(dmatrix![1.0], dmatrix![2.0], 1.0).unwrap();
        assert!(log_posterior(&model, &wrong_obs, &ok_state, NoiseTerm::Fixed).is_err());
        assert!(grad_log_posterior(&model, &wrong_obs, &ok_state).is_err());
    }

    #[test]
    fn observations_sorted_and_grouped() {
        let obs = ObservationSet::new(
            3,
            3,
            vec![
                Observation { row: 2, col: 0, value: 1.0 },
                Observation { row: 0, col: 2, value: 2.0 },
                Observation { row: 0, col: 1, value: 3.0 },
                Observation { row: 2, col: 2, value: 4.0 },
            ],
        )
        .unwrap();
        let keys: Vec<_> = obs.entries().iter().map(|e| (e.row, e.col)).collect();
        assert_eq!(keys, vec![(0, 1), (0, 2), (2, 0), (2, 2)]);
        assert_eq!(obs.in_row(1).count(), 0);
        let col2: Vec<_> = obs.in_col(2).map(|e| e.row).collect();
        assert_eq!(col2, vec![0, 2]);
    }

    #[test]
    fn observation_contract_errors() {
        let dup = vec![
            Observation { row: 0, col: 0, value: 1.0 },
            Observation { row: 0, col: 0, value: 2.0 },
        ];
        assert!(matches!(
            ObservationSet::new(2, 2, dup),
            Err(Error::DuplicateObservation { row: 0, col: 0 })
        ));
        let oob = vec![Observation { row: 2, col: 0, value: 1.0 }];
        assert!(matches!(ObservationSet::new(2, 2, oob), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn model_contract_errors() {
        assert!(FactorModel::zero_mean(2, 2, dvector![1.0, -1.0], dvector![1.0, 1.0], 1.0, 1.0).is_err());
        assert!(FactorModel::zero_mean(2, 2, dvector![1.0], dvector![1.0, 1.0], 1.0, 1.0).is_err());
        assert!(FactorModel::zero_mean(1, 2, dvector![1.0, 1.0], dvector![1.0, 1.0], 1.0, 1.0).is_err());
        assert!(FactorModel::zero_mean(2, 2, dvector![1.0], dvector![1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn identity_factors_reconstruct_identity() {
        let state = FactorState::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(reconstruct(&state), DMatrix::identity(2, 2));
    }

    #[test]
    fn example_one_matrix_from_factors() {
        // rows 3 and 4 of X are 2 r1 + r2 and r1 + r2
        let a = dmatrix![1.0, 0.0; 0.0, 1.0; 2.0, 1.0; 1.0, 1.0];
        let b = dmatrix![1.0, 2.0; 0.0, -1.0; 1.0, 1.0; 5.0, 4.0];
        let x = dmatrix![
            1.0, 0.0, 1.0, 5.0;
            2.0, -1.0, 1.0, 4.0;
            4.0, -1.0, 3.0, 14.0;
            3.0, -1.0, 2.0, 9.0
        ];
        let state = FactorState::new(a, b, 1.0).unwrap();
        assert_eq!(reconstruct(&state), x);
    }
}
