//! Chain post-processing: autocorrelation, integrated autocorrelation time,
//! reconstruction error and multi-chain aggregation.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};

/// Retained samples of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub monitor_names: Vec<String>,
    /// 1-based iteration number of each retained sample.
    pub iterations: Vec<usize>,
    /// `samples[k]` is the series of monitor `k`.
    pub samples: Vec<Vec<f64>>,
    /// Mean of `A Bᵀ` over the retained samples.
    pub recon_mean: DMatrix<f64>,
    /// Fraction of accepted HMC proposals; `None` for Gibbs.
    pub acceptance_rate: Option<f64>,
    /// HMC proposals rejected because the Hamiltonian was not finite.
    pub non_finite_rejections: usize,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.monitor_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.samples[k].as_slice())
    }
}

fn centered(series: &[f64]) -> Vec<f64> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|x| x - mean).collect()
}

// biased estimator: divide by N for every lag
fn autocov(centered: &[f64], lag: usize) -> f64 {
    let n = centered.len();
    centered[..n - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(x, y)| x * y)
        .sum::<f64>()
        / n as f64
}

/// `ρ(0..=max_lag)` with the full-series mean and the `1/N` autocovariance.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() < max_lag + 2 {
        return Err(Error::SeriesTooShort {
            needed: max_lag + 2,
            got: series.len(),
        });
    }
    let x = centered(series);
    let c0 = autocov(&x, 0);
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::UndefinedVariance);
    }
    let mut rho = Vec::with_capacity(max_lag + 1);
    rho.push(1.0);
    rho.extend((1..=max_lag).map(|t| autocov(&x, t) / c0));
    Ok(rho)
}

pub const MIN_TAU_INT_SAMPLES: usize = 100;

/// `τ_int = 1 + 2 Σ ρ(t)`, summed over whole pairs `ρ(2k) + ρ(2k+1)` until the
/// first negative pair (initial positive sequence). The result is floored at
/// `1/N` so it is always positive.
pub fn integrated_autocorrelation_time(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_TAU_INT_SAMPLES {
        return Err(Error::SeriesTooShort {
            needed: MIN_TAU_INT_SAMPLES,
            got: n,
        });
    }
    let x = centered(series);
    let c0 = autocov(&x, 0);
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::UndefinedVariance);
    }
    let mut pair_sum = 0.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = (autocov(&x, 2 * k) + autocov(&x, 2 * k + 1)) / c0;
        if gamma < 0.0 {
            break;
        }
        pair_sum += gamma;
        k += 1;
    }
    Ok((2.0 * pair_sum - 1.0).max(1.0 / n as f64))
}

/// Root mean squared error over all `m x n` entries.
pub fn rmse(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(shape_err("estimate", truth.shape(), estimate.shape()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let sq: f64 = truth.iter().zip(estimate.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSummary {
    pub name: String,
    pub pooled_mean: f64,
    pub chain_means: Vec<f64>,
    /// Unbiased (`N − 1`) sample variances; 0 for single-sample chains.
    pub chain_variances: Vec<f64>,
    /// `None` where the chain is too short or constant.
    pub chain_tau_int: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainsSummary {
    pub monitors: Vec<MonitorSummary>,
    pub pooled_recon: DMatrix<f64>,
    pub acceptance_rates: Vec<Option<f64>>,
}

impl ChainsSummary {
    pub fn monitor(&self, name: &str) -> Option<&MonitorSummary> {
        self.monitors.iter().find(|m| m.name == name)
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Per-monitor pooled and per-chain statistics plus the pooled reconstruction.
pub fn aggregate_chains(traces: &[ChainTrace]) -> Result<ChainsSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no chains to aggregate".into()))?;
    for (c, t) in traces.iter().enumerate() {
        if t.monitor_names != first.monitor_names {
            return Err(Error::InconsistentMonitors(format!(
                "chain {c} monitors {:?}, chain 0 monitors {:?}",
                t.monitor_names, first.monitor_names
            )));
        }
        if t.recon_mean.shape() != first.recon_mean.shape() {
            return Err(shape_err("recon_mean", first.recon_mean.shape(), t.recon_mean.shape()));
        }
        if t.is_empty() {
            return Err(Error::InvalidParameter(format!("chain {c} has no samples")));
        }
    }

    let monitors = first
        .monitor_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (chain_means, chain_variances): (Vec<_>, Vec<_>) =
                traces.iter().map(|t| mean_var(&t.samples[k])).unzip();
            let total: f64 = traces.iter().flat_map(|t| t.samples[k].iter()).sum();
            let count: usize = traces.iter().map(|t| t.samples[k].len()).sum();
            let chain_tau_int = traces
                .iter()
                .map(|t| integrated_autocorrelation_time(&t.samples[k]).ok())
                .collect();
            MonitorSummary {
                name: name.clone(),
                pooled_mean: total / count as f64,
                chain_means,
                chain_variances,
                chain_tau_int,
            }
        })
        .collect();

    let mut pooled_recon = DMatrix::zeros(first.recon_mean.nrows(), first.recon_mean.ncols());
    for t in traces {
        pooled_recon += &t.recon_mean;
    }
    pooled_recon /= traces.len() as f64;

    Ok(ChainsSummary {
        monitors,
        pooled_recon,
        acceptance_rates: traces.iter().map(|t| t.acceptance_rate).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white_noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn alternating(n: usize) -> Vec<f64> {
        (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn rho_zero_is_one() {
        let rho = autocorrelation(&white_noise(500, 1), 10).unwrap();
        assert_eq!(rho[0], 1.0);
        assert_eq!(rho.len(), 11);
    }

    #[test]
    fn alternating_series_anticorrelated() {
        let rho = autocorrelation(&alternating(1000), 2).unwrap();
        assert!((rho[1] + 1.0).abs() < 2.0 / 1000.0);
    }

    #[test]
    fn white_noise_acf_small() {
        let rho = autocorrelation(&white_noise(100_000, 2), 50).unwrap();
        assert!(rho[1..].iter().all(|r| r.abs() < 0.02));
    }

    #[test]
    fn constant_series_errors() {
        assert!(matches!(autocorrelation(&[2.0; 50], 3), Err(Error::UndefinedVariance)));
        assert!(matches!(
            integrated_autocorrelation_time(&[2.0; 200]),
            Err(Error::UndefinedVariance)
        ));
        assert!(matches!(autocorrelation(&[1.0, 2.0], 1), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn white_noise_tau_near_one() {
        let tau = integrated_autocorrelation_time(&white_noise(100_000, 3)).unwrap();
        assert!((0.8..=1.2).contains(&tau), "tau = {tau}");
    }

    #[test]
    fn alternating_tau_below_one() {
        let tau = integrated_autocorrelation_time(&alternating(1000)).unwrap();
        assert!(tau < 1.0 && tau > 0.0, "tau = {tau}");
    }

    #[test]
    fn rmse_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        let shifted = x.map(|v| v + 0.1);
        assert!((rmse(&x, &shifted).unwrap() - 0.1).abs() < 1e-12);
        assert!(rmse(&x, &DMatrix::zeros(2, 3)).is_err());
    }

    fn trace(values: Vec<f64>, recon: f64) -> ChainTrace {
        ChainTrace {
            monitor_names: vec!["A[0][0]".into()],
            iterations: (1..=values.len()).collect(),
            samples: vec![values],
            recon_mean: DMatrix::from_element(1, 1, recon),
            acceptance_rate: None,
            non_finite_rejections: 0,
        }
    }

    #[test]
    fn single_chain_summary() {
        let values = white_noise(200, 4);
        let t = trace(values.clone(), 2.0);
        let s = aggregate_chains(std::slice::from_ref(&t)).unwrap();
        let m = &s.monitors[0];
        let (mean, var) = mean_var(&values);
        assert_eq!(m.pooled_mean, mean);
        assert_eq!(m.chain_means, vec![mean]);
        assert_eq!(m.chain_variances, vec![var]);
        assert_eq!(m.chain_tau_int[0], Some(integrated_autocorrelation_time(&values).unwrap()));
        assert_eq!(s.pooled_recon[(0, 0)], 2.0);
    }

    #[test]
    fn identical_chains_pool_to_same_mean() {
        let t = trace(vec![1.0, 2.0, 4.0], 1.0);
        let s = aggregate_chains(&[t.clone(), t]).unwrap();
        assert!((s.monitors[0].pooled_mean - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.monitors[0].chain_tau_int, vec![None, None]);
    }

    #[test]
    fn inconsistent_monitors_rejected() {
        let a = trace(vec![1.0, 2.0], 0.0);
        let mut b = a.clone();
        b.monitor_names = vec!["B[0][0]".into()];
        assert!(matches!(aggregate_chains(&[a, b]), Err(Error::InconsistentMonitors(_))));
    }
}
