//! Maximum-likelihood fits of the heteroscedastic two-way model.
//!
//! The unrestricted fit is closed form. The two restricted fits (no
//! interaction, and no simple effects of factor A) are computed by
//! coordinate ascent: each sweep maximizes the likelihood exactly in the
//! row effects, then the column effects, then the cell variances, so the
//! log-likelihood never decreases from one sweep to the next.
//!
//! All fits work from the cell summaries alone; the residual sum of squares
//! in a cell decomposes exactly as `(n-1)S² + n(Ȳ - m)²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::CellSummaryTable;
use crate::error::{AnovaError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSpace {
    /// Unrestricted cell means.
    Full,
    /// Additive means `α_i + ζ_j` with `Σ α_i = 0`.
    NoInteraction,
    /// Means constant down each column: `ζ_j`.
    NoSimpleA,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Tolerance on successive changes of the mean parameters.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            epsilon: 1e-8,
            max_iterations: 10_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(AnovaError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(AnovaError::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Parameter estimates under one parameter space, plus solver diagnostics.
///
/// `zeta_j = μ + β_j`. Under [`ParameterSpace::Full`] `mu` and `gamma` are
/// populated; under [`ParameterSpace::NoSimpleA`] `alpha` is all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub space: ParameterSpace,
    pub mu: Option<f64>,
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub gamma: Option<Grid<f64>>,
    pub sigma2: Grid<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FittedModel {
    /// Fitted cell mean `m_ij`.
    pub fn fitted_mean(&self, i: usize, j: usize) -> f64 {
        let g = self.gamma.as_ref().map_or(0.0, |g| g[(i, j)]);
        self.alpha[i] + self.zeta[j] + g
    }

    /// `β_j = ζ_j - μ` for the full model.
    pub fn beta(&self) -> Option<Vec<f64>> {
        self.mu.map(|mu| self.zeta.iter().map(|z| z - mu).collect())
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(AnovaError::NonConvergence {
                iterations: self.iterations,
            })
        }
    }
}

/// Gaussian log-likelihood of the summarized data at the model's means and
/// variances, including the `-(N/2)ln(2π)` constant.
pub fn log_likelihood(summary: &CellSummaryTable, model: &FittedModel) -> Result<f64> {
    let (a, b) = (summary.a(), summary.b());
    if model.sigma2.shape() != (a, b) || model.alpha.len() != a || model.zeta.len() != b {
        return Err(AnovaError::DimensionMismatch(format!(
            "model is fitted to a {}x{} layout, summary is {a}x{b}",
            model.sigma2.rows(),
            model.sigma2.cols()
        )));
    }
    let means = Grid::from_fn(a, b, |i, j| model.fitted_mean(i, j));
    Ok(loglik_at(summary, &means, &model.sigma2))
}

pub(crate) fn loglik_at(summary: &CellSummaryTable, means: &Grid<f64>, sigma2: &Grid<f64>) -> f64 {
    let mut total_n = 0.0;
    let mut ll = 0.0;
    for i in 0..summary.a() {
        for j in 0..summary.b() {
            let n = summary.n(i, j);
            let s2 = sigma2[(i, j)];
            let r = summary.mean(i, j) - means[(i, j)];
            let rss = (n - 1.0) * summary.var(i, j) + n * r * r;
            ll -= 0.5 * n * s2.ln() + rss / (2.0 * s2);
            total_n += n;
        }
    }
    ll - 0.5 * total_n * (2.0 * PI).ln()
}

/// Closed-form fit under the unrestricted space.
pub fn fit_full(summary: &CellSummaryTable) -> Result<FittedModel> {
    summary.ensure_nondegenerate()?;
    let (a, b) = (summary.a(), summary.b());
    let m = summary.marginals();
    let alpha: Vec<f64> = m.rows.iter().map(|r| r - m.grand).collect();
    let zeta = m.cols.clone();
    let gamma = Grid::from_fn(a, b, |i, j| {
        summary.mean(i, j) - m.rows[i] - m.cols[j] + m.grand
    });
    let sigma2 = Grid::from_fn(a, b, |i, j| summary.ml_var(i, j));
    let mut model = FittedModel {
        space: ParameterSpace::Full,
        mu: Some(m.grand),
        alpha,
        zeta,
        gamma: Some(gamma),
        sigma2,
        loglik: 0.0,
        iterations: 0,
        converged: true,
    };
    model.loglik = log_likelihood(summary, &model)?;
    Ok(model)
}

/// Solves `(diag(w_1..w_{a-1}) + w_a 11ᵀ) x = u` by Sherman–Morrison.
///
/// `w` has length `a`, `u` has length `a - 1`.
pub(crate) fn solve_row_effects(w: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let k = u.len();
    debug_assert_eq!(w.len(), k + 1);
    let wa = w[k];
    if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(AnovaError::SingularSystem);
    }
    let inv_sum: f64 = w[..k].iter().map(|x| 1.0 / x).sum();
    let dinv_u: f64 = u.iter().zip(w).map(|(ui, wi)| ui / wi).sum();
    let denom = 1.0 + wa * inv_sum;
    if !denom.is_finite() || denom <= 0.0 {
        return Err(AnovaError::SingularSystem);
    }
    let coef = wa * dinv_u / denom;
    Ok(u.iter().zip(w).map(|(ui, wi)| (ui - coef) / wi).collect())
}

/// State of the coordinate ascent for the no-interaction space.
///
/// Exposed so callers can observe the iterates; [`fit_null_no_interaction`]
/// simply runs it to convergence.
#[derive(Debug, Clone)]
pub struct NoInteractionIteration<'a> {
    summary: &'a CellSummaryTable,
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub sigma2: Grid<f64>,
    pub iteration: usize,
}

impl<'a> NoInteractionIteration<'a> {
    /// Starting values: `α_i = Ȳ_i.`, `ζ_j = Ȳ_.j - Ȳ`, `σ²_ij` the biased
    /// cell variance.
    pub fn new(summary: &'a CellSummaryTable) -> Result<Self> {
        summary.ensure_nondegenerate()?;
        let m = summary.marginals();
        Ok(NoInteractionIteration {
            summary,
            alpha: m.rows.clone(),
            zeta: m.cols.iter().map(|c| c - m.grand).collect(),
            sigma2: Grid::from_fn(summary.a(), summary.b(), |i, j| summary.ml_var(i, j)),
            iteration: 0,
        })
    }

    /// One full sweep; returns the largest absolute change in `α` and `ζ`.
    pub fn sweep(&mut self) -> Result<(f64, f64)> {
        let s = self.summary;
        let (a, b) = (s.a(), s.b());
        let u = Grid::from_fn(a, b, |i, j| s.n(i, j) / self.sigma2[(i, j)]);

        let new_alpha = alpha_update(s, &u, &self.zeta)?;
        let new_zeta = zeta_update(s, &u, &new_alpha);

        for i in 0..a {
            for j in 0..b {
                let r = s.mean(i, j) - new_alpha[i] - new_zeta[j];
                self.sigma2[(i, j)] = s.ml_var(i, j) + r * r;
            }
        }
        let da = max_abs_change(&self.alpha, &new_alpha);
        let dz = max_abs_change(&self.zeta, &new_zeta);
        self.alpha = new_alpha;
        self.zeta = new_zeta;
        self.iteration += 1;
        Ok((da, dz))
    }

    pub fn loglik(&self) -> f64 {
        let means = Grid::from_fn(self.summary.a(), self.summary.b(), |i, j| {
            self.alpha[i] + self.zeta[j]
        });
        loglik_at(self.summary, &means, &self.sigma2)
    }

    fn into_model(self, converged: bool) -> FittedModel {
        let loglik = self.loglik();
        FittedModel {
            space: ParameterSpace::NoInteraction,
            mu: None,
            alpha: self.alpha,
            zeta: self.zeta,
            gamma: None,
            sigma2: self.sigma2,
            loglik,
            iterations: self.iteration,
            converged,
        }
    }
}

// Row effects maximizing the likelihood for fixed ζ and weights u = n/σ².
fn alpha_update(s: &CellSummaryTable, u: &Grid<f64>, zeta: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = (s.a(), s.b());
    let w: Vec<f64> = (0..a).map(|i| u.row(i).iter().sum()).collect();
    let resid = |i: usize| -> f64 { (0..b).map(|j| u[(i, j)] * (s.mean(i, j) - zeta[j])).sum() };
    let last = resid(a - 1);
    let rhs: Vec<f64> = (0..a - 1).map(|i| resid(i) - last).collect();
    let mut alpha = solve_row_effects(&w, &rhs)?;
    alpha.push(-alpha.iter().sum::<f64>());
    Ok(alpha)
}

// Precision-weighted column effects for fixed α.
fn zeta_update(s: &CellSummaryTable, u: &Grid<f64>, alpha: &[f64]) -> Vec<f64> {
    (0..s.b())
        .map(|j| {
            let (num, den) = (0..s.a()).fold((0.0, 0.0), |(num, den), i| {
                (num + u[(i, j)] * (s.mean(i, j) - alpha[i]), den + u[(i, j)])
            });
            num / den
        })
        .collect()
}

fn max_abs_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fit under the no-interaction space by coordinate ascent.
///
/// The likelihood can have several stationary points. When the run from the
/// default start ends below the no-simple-A maximum (a sub-model), the
/// ascent is restarted from that fit and the better of the two is kept, so
/// the result never has a smaller likelihood than the nested space.
///
/// Hitting `max_iterations` is not an error: the last iterate comes back with
/// `converged = false`.
pub fn fit_null_no_interaction(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<FittedModel> {
    let nested = fit_null_no_simple_a(summary, settings)?;
    fit_null_no_interaction_above(summary, settings, &nested)
}

/// [`fit_null_no_interaction`] given an already computed no-simple-A fit.
pub(crate) fn fit_null_no_interaction_above(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
    nested: &FittedModel,
) -> Result<FittedModel> {
    settings.validate()?;
    let first = run_no_interaction(NoInteractionIteration::new(summary)?, settings)?;
    if first.loglik >= nested.loglik {
        return Ok(first);
    }
    let start = NoInteractionIteration {
        summary,
        alpha: vec![0.0; summary.a()],
        zeta: nested.zeta.clone(),
        sigma2: nested.sigma2.clone(),
        iteration: 0,
    };
    let second = run_no_interaction(start, settings)?;
    Ok(if second.loglik > first.loglik {
        second
    } else {
        first
    })
}

fn run_no_interaction(
    mut it: NoInteractionIteration<'_>,
    settings: &SolverSettings,
) -> Result<FittedModel> {
    while it.iteration < settings.max_iterations {
        let (da, dz) = it.sweep()?;
        if da <= settings.epsilon && dz <= settings.epsilon {
            return Ok(it.into_model(true));
        }
    }
    Ok(it.into_model(false))
}

/// State of the coordinate ascent for the no-simple-effects space.
#[derive(Debug, Clone)]
pub struct NoSimpleAIteration<'a> {
    summary: &'a CellSummaryTable,
    pub zeta: Vec<f64>,
    pub sigma2: Grid<f64>,
    pub iteration: usize,
}

impl<'a> NoSimpleAIteration<'a> {
    /// Starting values: `ζ_j = Ȳ_.j`, biased cell variances.
    pub fn new(summary: &'a CellSummaryTable) -> Result<Self> {
        summary.ensure_nondegenerate()?;
        Ok(NoSimpleAIteration {
            summary,
            zeta: summary.col_means(),
            sigma2: Grid::from_fn(summary.a(), summary.b(), |i, j| summary.ml_var(i, j)),
            iteration: 0,
        })
    }

    /// One sweep; returns the largest absolute change in `ζ`.
    pub fn sweep(&mut self) -> f64 {
        let s = self.summary;
        let (a, b) = (s.a(), s.b());
        let u = Grid::from_fn(a, b, |i, j| s.n(i, j) / self.sigma2[(i, j)]);
        let new_zeta = zeta_update(s, &u, &vec![0.0; a]);
        for i in 0..a {
            for j in 0..b {
                let r = s.mean(i, j) - new_zeta[j];
                self.sigma2[(i, j)] = s.ml_var(i, j) + r * r;
            }
        }
        let dz = max_abs_change(&self.zeta, &new_zeta);
        self.zeta = new_zeta;
        self.iteration += 1;
        dz
    }

    pub fn loglik(&self) -> f64 {
        let means = Grid::from_fn(self.summary.a(), self.summary.b(), |_, j| self.zeta[j]);
        loglik_at(self.summary, &means, &self.sigma2)
    }

    fn into_model(self, converged: bool) -> FittedModel {
        let loglik = self.loglik();
        FittedModel {
            space: ParameterSpace::NoSimpleA,
            mu: None,
            alpha: vec![0.0; self.summary.a()],
            zeta: self.zeta,
            gamma: None,
            sigma2: self.sigma2,
            loglik,
            iterations: self.iteration,
            converged,
        }
    }
}

/// Fit under the space with no simple effects of factor A.
pub fn fit_null_no_simple_a(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<FittedModel> {
    settings.validate()?;
    let mut it = NoSimpleAIteration::new(summary)?;
    while it.iteration < settings.max_iterations {
        if it.sweep() <= settings.epsilon {
            return Ok(it.into_model(true));
        }
    }
    Ok(it.into_model(false))
}

/// Largest violation of each block of likelihood equations at `model`,
/// measured as the change one more exact block update would make.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityResiduals {
    pub alpha: f64,
    pub zeta: f64,
    pub sigma2: f64,
}

impl StationarityResiduals {
    pub fn max(&self) -> f64 {
        self.alpha.max(self.zeta).max(self.sigma2)
    }
}

pub fn stationarity_residuals(
    summary: &CellSummaryTable,
    model: &FittedModel,
) -> Result<StationarityResiduals> {
    let (a, b) = (summary.a(), summary.b());
    let u = Grid::from_fn(a, b, |i, j| summary.n(i, j) / model.sigma2[(i, j)]);
    let alpha_res = match model.space {
        ParameterSpace::NoInteraction => {
            max_abs_change(&model.alpha, &alpha_update(summary, &u, &model.zeta)?)
        }
        _ => 0.0,
    };
    let zeta_res = match model.space {
        ParameterSpace::Full => 0.0,
        _ => max_abs_change(&model.zeta, &zeta_update(summary, &u, &model.alpha)),
    };
    let mut sigma_res: f64 = 0.0;
    for i in 0..a {
        for j in 0..b {
            let r = summary.mean(i, j) - model.fitted_mean(i, j);
            let target = summary.ml_var(i, j) + r * r;
            sigma_res = sigma_res.max((model.sigma2[(i, j)] - target).abs());
        }
    }
    Ok(StationarityResiduals {
        alpha: alpha_res,
        zeta: zeta_res,
        sigma2: sigma_res,
    })
}
