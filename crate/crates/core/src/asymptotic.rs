//! Large-sample critical values.
//!
//! Likelihood-ratio tests use the chi-square limit of `-2 ln λ`. The
//! asymptotic max-type treatment test compares `T` with the two-sided
//! equicoordinate quantile of `N_q(0, Σ_T)`, where `Σ_T` is the limiting
//! correlation matrix of the standardized row-mean differences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::bootstrap::{quantile_rank, stream_rng, validate_alpha};
use crate::data::CellSummaryTable;
use crate::error::{AnovaError, Result};
use crate::mle::SolverSettings;
use crate::stats::{compute, StatisticKind, StatisticValue};

/// Upper-`alpha` point of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi_square_critical(df: f64, alpha: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(AnovaError::InvalidDf(df));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnovaError::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    let chi = ChiSquared::new(df).map_err(|_| AnovaError::InvalidDf(df))?;
    Ok(chi.inverse_cdf(1.0 - alpha))
}

pub fn chi_square_sf(df: f64, x: f64) -> Result<f64> {
    let chi = ChiSquared::new(df).map_err(|_| AnovaError::InvalidDf(df))?;
    Ok(chi.sf(x.max(0.0)))
}

/// Limiting covariance of the pairwise row-mean differences.
///
/// Pairs are ordered `(1,2), (1,3), …, (1,a), (2,3), …, (a-1,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    pub pairs: Vec<(usize, usize)>,
    /// Covariance of `√N(Ȳ_i. − Ȳ_i'.)`.
    pub sigma_z: DMatrix<f64>,
    /// Correlation of the standardized differences `T_ii'`.
    pub sigma_t: DMatrix<f64>,
    /// Standard deviations `τ_ii'` (diagonal of `D`).
    pub tau: Vec<f64>,
    /// Per-row variances `η²_i`.
    pub eta2: Vec<f64>,
}

impl AsymptoticCovariance {
    pub fn q(&self) -> usize {
        self.pairs.len()
    }

    /// Builds `Σ_z = A diag(η²) Aᵀ` and `Σ_T = D⁻¹ Σ_z D⁻¹` from row
    /// variances, where `A` has rows `e_i − e_i'`.
    pub fn from_eta2(eta2: Vec<f64>) -> Result<Self> {
        let a = eta2.len();
        if a < 2 {
            return Err(AnovaError::InvalidLayout("need at least two rows".into()));
        }
        if eta2.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(AnovaError::InvalidParameter(
                "row variances must be positive".into(),
            ));
        }
        let pairs = pair_list(a);
        let q = pairs.len();
        let diff = difference_matrix(a);
        let sigma_z =
            &diff * DMatrix::from_diagonal(&DVector::from_vec(eta2.clone())) * diff.transpose();
        let tau: Vec<f64> = (0..q).map(|k| sigma_z[(k, k)].sqrt()).collect();
        let sigma_t = DMatrix::from_fn(q, q, |k, l| {
            if k == l {
                1.0
            } else {
                sigma_z[(k, l)] / (tau[k] * tau[l])
            }
        });
        Ok(AsymptoticCovariance {
            pairs,
            sigma_z,
            sigma_t,
            tau,
            eta2,
        })
    }
}

pub(crate) fn pair_list(a: usize) -> Vec<(usize, usize)> {
    (0..a)
        .flat_map(|i| (i + 1..a).map(move |k| (i, k)))
        .collect()
}

/// `q × a` matrix whose rows are `e_i − e_i'` in pair order.
pub fn difference_matrix(a: usize) -> DMatrix<f64> {
    let pairs = pair_list(a);
    DMatrix::from_fn(pairs.len(), a, |r, c| {
        let (i, k) = pairs[r];
        if c == i {
            1.0
        } else if c == k {
            -1.0
        } else {
            0.0
        }
    })
}

/// Plug-in covariance for a summary: `η̂²_i = (N/b²) Σ_j S²_ij/n_ij` with the
/// unbiased `S²`.
pub fn build_sigma_t(summary: &CellSummaryTable) -> Result<AsymptoticCovariance> {
    summary.ensure_nondegenerate()?;
    let total = summary.layout().total() as f64;
    let b = summary.b() as f64;
    let eta2 = (0..summary.a())
        .map(|i| total / (b * b) * (0..summary.b()).map(|j| summary.se2(i, j)).sum::<f64>())
        .collect();
    AsymptoticCovariance::from_eta2(eta2)
}

/// Draws used for equicoordinate quantiles unless overridden.
pub const DEFAULT_MC_DRAWS: usize = 200_000;
/// Seed used for equicoordinate quantiles unless overridden.
pub const DEFAULT_MC_SEED: u64 = 0x5eed_0f_a5c7;

const CHUNK: usize = 8192;

/// Symmetric square root `L` with `L Lᵀ = Σ`, via the eigendecomposition.
pub fn symmetric_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = sigma.nrows();
    let trace = sigma.trace();
    let tol = 1e-10 * (trace / q as f64).abs().max(1.0);
    let decompose = |m: DMatrix<f64>| {
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.min();
        (eig, min)
    };
    let (mut eig, mut min) = decompose(sigma.clone());
    if min < -tol {
        let jitter = 1e-12 * trace / q as f64;
        (eig, min) = decompose(sigma + DMatrix::identity(q, q) * jitter);
        if min < -tol {
            return Err(AnovaError::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Monte Carlo sample of `max_k |G_k|` for `G ~ N_q(0, Σ)`.
///
/// Chunk `c` of 8192 draws uses substream `c` of `seed`, so the result is
/// independent of the thread count.
pub fn max_abs_normal_sample(sigma: &DMatrix<f64>, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let root = symmetric_sqrt(sigma)?;
    let q = sigma.nrows();
    let chunks = draws.div_ceil(CHUNK);
    let out: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            let mut z = DVector::zeros(q);
            let mut g = DVector::zeros(q);
            (0..len)
                .map(|_| {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(&mut rng);
                    }
                    g.gemv(1.0, &root, &z, 0.0);
                    g.amax()
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Two-sided equicoordinate `(1 − alpha)` quantile of `N_q(0, Σ)`: the `d`
/// with `P(max_k |G_k| ≤ d) = 1 − alpha`, estimated from `draws` Monte Carlo
/// samples. A single unit-variance coordinate uses the exact normal quantile.
pub fn equicoordinate_quantile_of(
    sigma: &DMatrix<f64>,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    validate_alpha(alpha)?;
    if draws == 0 {
        return Err(AnovaError::InvalidParameter(
            "draws must be positive".into(),
        ));
    }
    if sigma.nrows() == 1 {
        return Ok(sigma[(0, 0)].sqrt() * std_normal().inverse_cdf(1.0 - alpha / 2.0));
    }
    let mut sample = max_abs_normal_sample(sigma, draws, seed)?;
    let rank = quantile_rank(1.0 - alpha, draws);
    let (_, d, _) = sample.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*d)
}

pub fn equicoordinate_quantile(
    cov: &AsymptoticCovariance,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    equicoordinate_quantile_of(&cov.sigma_t, alpha, draws, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticKind {
    AlrtInteraction,
    AlrtSimpleA,
    AlrtTreatmentA,
    AmctTreatmentA,
}

impl AsymptoticKind {
    pub fn statistic(self) -> StatisticKind {
        match self {
            AsymptoticKind::AlrtInteraction => StatisticKind::LrtInteraction,
            AsymptoticKind::AlrtSimpleA => StatisticKind::LrtSimpleA,
            AsymptoticKind::AlrtTreatmentA => StatisticKind::LrtTreatmentA,
            AsymptoticKind::AmctTreatmentA => StatisticKind::MctTreatmentA,
        }
    }

    /// Chi-square degrees of freedom for the likelihood-ratio kinds.
    pub fn df(self, a: usize, b: usize) -> Option<f64> {
        let (a, b) = (a as f64, b as f64);
        match self {
            AsymptoticKind::AlrtInteraction => Some((a - 1.0) * (b - 1.0)),
            AsymptoticKind::AlrtSimpleA => Some((a - 1.0) * b),
            AsymptoticKind::AlrtTreatmentA => Some(a - 1.0),
            AsymptoticKind::AmctTreatmentA => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub draws: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            draws: DEFAULT_MC_DRAWS,
            seed: DEFAULT_MC_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticResult {
    pub kind: AsymptoticKind,
    pub statistic: StatisticValue,
    /// `-2 ln λ` for likelihood ratios, `T` for the max-type test.
    pub observed: f64,
    pub critical_value: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub reject: bool,
}

/// Asymptotic test: `-2 ln λ` against the chi-square point, or `T` against
/// the equicoordinate normal quantile of the plug-in `Σ_T`.
pub fn asymptotic_test(
    summary: &CellSummaryTable,
    kind: AsymptoticKind,
    alpha: f64,
    solver: &SolverSettings,
    mc: &McSettings,
) -> Result<AsymptoticResult> {
    validate_alpha(alpha)?;
    let statistic = compute(kind.statistic(), summary, solver)?;
    match kind.df(summary.a(), summary.b()) {
        Some(df) => {
            let observed = statistic.deviance().unwrap_or(0.0);
            let critical_value = chi_square_critical(df, alpha)?;
            Ok(AsymptoticResult {
                kind,
                observed,
                critical_value,
                p_value: chi_square_sf(df, observed)?,
                df: Some(df),
                reject: observed > critical_value,
                statistic,
            })
        }
        None => {
            let cov = build_sigma_t(summary)?;
            let observed = statistic.value;
            let critical_value = equicoordinate_quantile(&cov, alpha, mc.draws, mc.seed)?;
            let p_value = if cov.q() == 1 {
                2.0 * std_normal().sf(observed)
            } else {
                let sample = max_abs_normal_sample(&cov.sigma_t, mc.draws, mc.seed)?;
                sample.iter().filter(|&&g| g >= observed).count() as f64 / sample.len() as f64
            };
            Ok(AsymptoticResult {
                kind,
                observed,
                critical_value,
                p_value,
                df: None,
                reject: observed > critical_value,
                statistic,
            })
        }
    }
}
