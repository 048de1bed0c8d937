//! Parametric bootstrap null distributions.
//!
//! Each replicate draws `n_ij` independent `N(0, S²_ij)` observations per
//! cell (`S²` unbiased), summarizes them and evaluates the statistic. The
//! null draw depends on the data only through the sizes and variances.
//!
//! Replicate `r` reads from ChaCha stream `r` of the seeded generator, so the
//! null sample is identical however replicates are scheduled across threads.
//! A replicate whose restricted fit fails to converge is redrawn from the
//! continuation of its own stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CellSummaryTable, Layout};
use crate::error::{AnovaError, Result};
use crate::grid::Grid;
use crate::mle::SolverSettings;
use crate::stats::{compute, compute_test_scale, StatisticKind, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    /// Number of bootstrap replicates `H`.
    pub replicates: usize,
    /// Significance level.
    pub alpha: f64,
    pub seed: u64,
    /// Redraws allowed per replicate when a restricted fit does not converge.
    pub max_redraws: usize,
    /// Spread replicates over the rayon pool. Results do not depend on it.
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            replicates: 5000,
            alpha: 0.05,
            seed: 0,
            max_redraws: 10,
            parallel: true,
        }
    }
}

impl BootstrapSettings {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Self {
        BootstrapSettings {
            replicates,
            alpha,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(AnovaError::InvalidParameter(format!(
                "at least 100 bootstrap replicates are required, got {}",
                self.replicates
            )));
        }
        validate_alpha(self.alpha)
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(AnovaError::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed and an index into an unrelated seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        ^ index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order statistic (1-based rank) used as the empirical quantile:
/// `⌈p·H⌉`, clamped to `1..=H`.
pub fn quantile_rank(p: f64, h: usize) -> usize {
    let x = p * h as f64;
    // absorb representation error such as 0.95 * 5000 = 4750.000000000001
    let rank = (x - 1e-9 * x.abs().max(1.0)).ceil() as usize;
    rank.clamp(1, h)
}

/// Null distribution of one statistic, kept on its test scale (`ln λ` for
/// likelihood ratios) and sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSample {
    pub kind: StatisticKind,
    sorted: Vec<f64>,
    /// In replicate order.
    values: Vec<f64>,
    pub nonconverged_redraws: usize,
}

impl NullSample {
    fn new(kind: StatisticKind, values: Vec<f64>, nonconverged_redraws: usize) -> Self {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        NullSample {
            kind,
            sorted,
            values,
            nonconverged_redraws,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Test-scale values in replicate order.
    pub fn test_scale_values(&self) -> &[f64] {
        &self.values
    }

    /// Statistic values (`λ`, not `ln λ`) in replicate order.
    pub fn values(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| to_natural(self.kind, v))
            .collect()
    }

    /// Critical value on the test scale: the `⌈αH⌉`-th order statistic for
    /// lower-tail statistics, the `⌈(1-α)H⌉`-th for upper-tail ones.
    pub fn critical_test_scale(&self, alpha: f64) -> f64 {
        let p = match self.kind.tail() {
            Tail::Lower => alpha,
            Tail::Upper => 1.0 - alpha,
        };
        self.sorted[quantile_rank(p, self.sorted.len()) - 1]
    }

    pub fn critical_value(&self, alpha: f64) -> f64 {
        to_natural(self.kind, self.critical_test_scale(alpha))
    }

    /// Fraction of the null sample at least as extreme as `observed`
    /// (test scale).
    pub fn p_value(&self, observed: f64) -> f64 {
        let h = self.sorted.len() as f64;
        let count = match self.kind.tail() {
            Tail::Lower => self.sorted.partition_point(|&v| v <= observed),
            Tail::Upper => self.sorted.len() - self.sorted.partition_point(|&v| v < observed),
        };
        count as f64 / h
    }

    pub fn rejects(&self, observed: f64, alpha: f64) -> bool {
        let crit = self.critical_test_scale(alpha);
        match self.kind.tail() {
            Tail::Lower => observed < crit,
            Tail::Upper => observed > crit,
        }
    }
}

fn to_natural(kind: StatisticKind, v: f64) -> f64 {
    if kind.is_lrt() {
        v.exp()
    } else {
        v
    }
}

/// Draws one bootstrap summary table: `n_ij` draws from `N(0, var_ij)` per
/// cell.
pub fn draw_null_summary(
    layout: &Layout,
    var: &Grid<f64>,
    rng: &mut impl Rng,
) -> Result<CellSummaryTable> {
    let (a, b) = (layout.a(), layout.b());
    let mut mean = Grid::filled(a, b, 0.0);
    let mut s2 = Grid::filled(a, b, 0.0);
    let mut buf = Vec::new();
    for i in 0..a {
        for j in 0..b {
            let sd = var[(i, j)].sqrt();
            buf.clear();
            buf.extend((0..layout.n(i, j)).map(|_| sd * rng.sample::<f64, _>(StandardNormal)));
            let (m, v) = crate::data::mean_var(&buf);
            mean[(i, j)] = m;
            s2[(i, j)] = v;
        }
    }
    CellSummaryTable::new(layout.clone(), mean, s2)
}

fn replicate(
    summary: &CellSummaryTable,
    kinds: &[StatisticKind],
    settings: &BootstrapSettings,
    solver: &SolverSettings,
    r: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream_rng(settings.seed, r as u64);
    let mut redraws = 0;
    loop {
        let boot = draw_null_summary(summary.layout(), summary.vars(), &mut rng)?;
        let values: Result<Vec<f64>> = kinds
            .iter()
            .map(|&k| compute_test_scale(k, &boot, solver))
            .collect();
        match values {
            Ok(v) => return Ok((v, redraws)),
            Err(AnovaError::NonConvergence { .. }) if redraws < settings.max_redraws => {
                redraws += 1
            }
            Err(AnovaError::NonConvergence { .. }) => {
                return Err(AnovaError::ExcessiveNonConvergence {
                    replicate: r,
                    redraws,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Null samples for several statistics computed from the same bootstrap
/// draws (one [`NullSample`] per kind, in order).
pub fn bootstrap_null_samples(
    summary: &CellSummaryTable,
    kinds: &[StatisticKind],
    settings: &BootstrapSettings,
    solver: &SolverSettings,
) -> Result<Vec<NullSample>> {
    settings.validate()?;
    solver.validate()?;
    summary.ensure_nondegenerate()?;
    let run = |r| replicate(summary, kinds, settings, solver, r);
    let reps: Vec<(Vec<f64>, usize)> = if settings.parallel {
        (0..settings.replicates)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    } else {
        (0..settings.replicates).map(run).collect::<Result<_>>()?
    };
    let redraws = reps.iter().map(|(_, r)| r).sum();
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| NullSample::new(kind, reps.iter().map(|(v, _)| v[k]).collect(), redraws))
        .collect())
}

/// Bootstrap null sample of one statistic, on its natural scale (`λ` for
/// likelihood ratios), in replicate order.
pub fn bootstrap_null_sample(
    summary: &CellSummaryTable,
    kind: StatisticKind,
    settings: &BootstrapSettings,
    solver: &SolverSettings,
) -> Result<Vec<f64>> {
    let mut samples = bootstrap_null_samples(summary, &[kind], settings, solver)?;
    Ok(samples.remove(0).values())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub kind: StatisticKind,
    pub observed: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub tail: Tail,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_sample: Option<Vec<f64>>,
    pub nonconverged_redraws: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn from_null(
        observed_test_scale: f64,
        null: &NullSample,
        settings: &BootstrapSettings,
        keep_sample: bool,
    ) -> Self {
        BootstrapResult {
            kind: null.kind,
            observed: to_natural(null.kind, observed_test_scale),
            critical_value: null.critical_value(settings.alpha),
            p_value: null.p_value(observed_test_scale),
            tail: null.kind.tail(),
            reject: null.rejects(observed_test_scale, settings.alpha),
            null_sample: keep_sample.then(|| null.values()),
            nonconverged_redraws: null.nonconverged_redraws,
            replicates: null.len(),
            seed: settings.seed,
        }
    }
}

/// Observed statistic against its bootstrap null distribution.
pub fn bootstrap_test(
    summary: &CellSummaryTable,
    kind: StatisticKind,
    settings: &BootstrapSettings,
    solver: &SolverSettings,
) -> Result<BootstrapResult> {
    let observed = compute(kind, summary, solver)?.test_scale();
    let null = bootstrap_null_samples(summary, &[kind], settings, solver)?.remove(0);
    Ok(BootstrapResult::from_null(observed, &null, settings, true))
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when
/// `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build thread pool")
            .install(f),
        None => f(),
    }
}
