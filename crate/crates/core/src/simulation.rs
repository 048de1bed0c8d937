//! Monte Carlo size and power studies.
//!
//! A [`SimulationConfig`] fixes the cell means, variances, sizes and error
//! family. [`run_study`] generates `outer_reps` data sets and records how
//! often each requested test rejects. Every replicate draws from its own
//! substream, so results do not depend on thread scheduling.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::gamma::gamma;

use crate::asymptotic::{chi_square_critical, McSettings};
use crate::bootstrap::{bootstrap_null_samples, derive_seed, stream_rng, BootstrapSettings};
use crate::data::{summarize, Layout, RawDataset, Record};
use crate::error::{AnovaError, Result};
use crate::grid::Grid;
use crate::inference::{asymptotic_treatment_quantile, statistic_kind, TestMethod, TestTarget};
use crate::mle::SolverSettings;
use crate::stats::{compute_test_scale, StatisticKind};

/// Distribution of the raw errors before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorFamily {
    Normal,
    /// `p·N(m1, v1) + (1−p)·N(m2, v2)`; `v1`, `v2` are variances.
    NormalMixture {
        p: f64,
        m1: f64,
        v1: f64,
        m2: f64,
        v2: f64,
    },
    StudentT {
        df: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    Laplace {
        location: f64,
        scale: f64,
    },
}

impl ErrorFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AnovaError::InvalidFamilyParams(m));
        match *self {
            ErrorFamily::Normal => Ok(()),
            ErrorFamily::NormalMixture { p, v1, v2, .. } => {
                if !(0.0..=1.0).contains(&p) || !(v1 > 0.0) || !(v2 > 0.0) {
                    return bad(format!("mixture needs p in [0,1] and positive variances, got p={p}, v1={v1}, v2={v2}"));
                }
                Ok(())
            }
            ErrorFamily::StudentT { df } if !(df > 2.0) => bad(format!(
                "Student t needs df > 2 for a finite variance, got {df}"
            )),
            ErrorFamily::Weibull { shape, scale } if !(shape > 0.0 && scale > 0.0) => bad(format!(
                "Weibull needs positive shape and scale, got {shape}, {scale}"
            )),
            ErrorFamily::Laplace { scale, .. } if !(scale > 0.0) => {
                bad(format!("Laplace needs a positive scale, got {scale}"))
            }
            _ => Ok(()),
        }
    }

    /// Analytic mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            ErrorFamily::Normal => (0.0, 1.0),
            ErrorFamily::NormalMixture { p, m1, v1, m2, v2 } => {
                let m = p * m1 + (1.0 - p) * m2;
                (m, p * (v1 + m1 * m1) + (1.0 - p) * (v2 + m2 * m2) - m * m)
            }
            ErrorFamily::StudentT { df } => (0.0, df / (df - 2.0)),
            ErrorFamily::Weibull { shape, scale } => {
                let g1 = gamma(1.0 + 1.0 / shape);
                let g2 = gamma(1.0 + 2.0 / shape);
                (scale * g1, scale * scale * (g2 - g1 * g1))
            }
            ErrorFamily::Laplace { location, scale } => (location, 2.0 * scale * scale),
        }
    }

    /// A sampler of `(X − μ_x)/σ_x`.
    pub fn standardized(&self) -> Result<StandardizedErrors> {
        self.validate()?;
        let (mean, var) = self.moments();
        let inner = match *self {
            ErrorFamily::Normal => Sampler::Normal,
            ErrorFamily::NormalMixture { p, m1, v1, m2, v2 } => Sampler::Mixture {
                p,
                m1,
                s1: v1.sqrt(),
                m2,
                s2: v2.sqrt(),
            },
            ErrorFamily::StudentT { df } => Sampler::T(
                StudentT::new(df).map_err(|e| AnovaError::InvalidFamilyParams(e.to_string()))?,
            ),
            ErrorFamily::Weibull { shape, scale } => Sampler::Weibull(
                Weibull::new(scale, shape)
                    .map_err(|e| AnovaError::InvalidFamilyParams(e.to_string()))?,
            ),
            ErrorFamily::Laplace { location, scale } => Sampler::Laplace { location, scale },
        };
        Ok(StandardizedErrors {
            inner,
            mean,
            sd: var.sqrt(),
        })
    }
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorFamily::Normal => write!(f, "normal"),
            ErrorFamily::NormalMixture { p, m1, v1, m2, v2 } => {
                write!(f, "mixture({p}: N({m1},{v1}) + N({m2},{v2}); v = variance)")
            }
            ErrorFamily::StudentT { df } => write!(f, "t({df})"),
            ErrorFamily::Weibull { shape, scale } => {
                write!(f, "weibull(shape {shape}, scale {scale})")
            }
            ErrorFamily::Laplace { location, scale } => write!(f, "laplace({location}, {scale})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Sampler {
    Normal,
    Mixture {
        p: f64,
        m1: f64,
        s1: f64,
        m2: f64,
        s2: f64,
    },
    T(StudentT<f64>),
    Weibull(Weibull<f64>),
    Laplace {
        location: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct StandardizedErrors {
    inner: Sampler,
    mean: f64,
    sd: f64,
}

impl Distribution<f64> for StandardizedErrors {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match self.inner {
            Sampler::Normal => return rng.sample(StandardNormal),
            Sampler::Mixture { p, m1, s1, m2, s2 } => {
                let z: f64 = rng.sample(StandardNormal);
                if rng.random::<f64>() < p {
                    m1 + s1 * z
                } else {
                    m2 + s2 * z
                }
            }
            Sampler::T(t) => t.sample(rng),
            Sampler::Weibull(w) => w.sample(rng),
            Sampler::Laplace { location, scale } => {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        };
        (x - self.mean) / self.sd
    }
}

/// One test to evaluate in every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudyTest {
    pub target: TestTarget,
    pub method: TestMethod,
}

impl StudyTest {
    pub fn new(target: TestTarget, method: TestMethod) -> Self {
        StudyTest { target, method }
    }

    pub fn target_name(&self) -> &'static str {
        match self.target {
            TestTarget::Interaction => "interaction",
            TestTarget::SimpleA => "simpleA",
            TestTarget::SimpleB => "simpleB",
            TestTarget::TreatmentA => "treatmentA",
            TestTarget::TreatmentB => "treatmentB",
        }
    }
}

fn default_outer() -> usize {
    2000
}

fn default_bootstrap() -> BootstrapSettings {
    BootstrapSettings {
        replicates: 1000,
        parallel: false,
        ..Default::default()
    }
}

fn default_mc() -> McSettings {
    McSettings {
        draws: 20_000,
        ..Default::default()
    }
}

fn default_nominal() -> f64 {
    0.05
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub id: String,
    /// Cell sizes, `a × b`.
    pub n: Grid<usize>,
    #[serde(default)]
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Interaction effects; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Grid<f64>>,
    pub sigma2: Grid<f64>,
    /// `c`, multiplying `alpha`.
    #[serde(default = "default_scale")]
    pub effect_scale: f64,
    #[serde(default = "default_family")]
    pub error_family: ErrorFamily,
    #[serde(default = "default_outer")]
    pub outer_reps: usize,
    /// Inner bootstrap; its `alpha` is overridden by `nominal_alpha`.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: BootstrapSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default = "default_mc")]
    pub mc: McSettings,
    pub tests: Vec<StudyTest>,
    #[serde(default = "default_nominal")]
    pub nominal_alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_family() -> ErrorFamily {
    ErrorFamily::Normal
}

impl SimulationConfig {
    /// Null-free normal config with desk-scale defaults.
    pub fn new(
        id: impl Into<String>,
        n: Grid<usize>,
        sigma2: Grid<f64>,
        tests: Vec<StudyTest>,
    ) -> Self {
        let (a, b) = n.shape();
        SimulationConfig {
            id: id.into(),
            n,
            mu: 0.0,
            alpha: vec![0.0; a],
            beta: vec![0.0; b],
            gamma: None,
            sigma2,
            effect_scale: 1.0,
            error_family: ErrorFamily::Normal,
            outer_reps: default_outer(),
            bootstrap: default_bootstrap(),
            solver: SolverSettings::default(),
            mc: default_mc(),
            tests,
            nominal_alpha: 0.05,
            seed: 0,
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        Layout::new(self.n.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.layout()?;
        let (a, b) = (layout.a(), layout.b());
        if self.alpha.len() != a || self.beta.len() != b {
            return Err(AnovaError::DimensionMismatch(format!(
                "{}: alpha has {} entries and beta {}, layout is {a}x{b}",
                self.id,
                self.alpha.len(),
                self.beta.len()
            )));
        }
        if self.sigma2.shape() != (a, b) {
            return Err(AnovaError::DimensionMismatch(format!(
                "{}: sigma2 is {}x{}, layout is {a}x{b}",
                self.id,
                self.sigma2.rows(),
                self.sigma2.cols()
            )));
        }
        if let Some((pos, _)) = self
            .sigma2
            .indexed()
            .find(|(_, &s)| !(s > 0.0 && s.is_finite()))
        {
            return Err(AnovaError::InvalidParameter(format!(
                "{}: sigma2 at cell ({},{}) must be positive",
                self.id,
                pos.0 + 1,
                pos.1 + 1
            )));
        }
        if let Some(g) = &self.gamma {
            if g.shape() != (a, b) {
                return Err(AnovaError::DimensionMismatch(format!(
                    "{}: gamma is not {a}x{b}",
                    self.id
                )));
            }
            let tol = 1e-9 * (1.0 + g.iter().map(|x| x.abs()).fold(0.0, f64::max));
            let rows_ok = (0..a).all(|i| g.row(i).iter().sum::<f64>().abs() <= tol);
            let cols_ok = (0..b).all(|j| (0..a).map(|i| g[(i, j)]).sum::<f64>().abs() <= tol);
            if !rows_ok || !cols_ok {
                return Err(AnovaError::InvalidParameter(format!(
                    "{}: gamma must sum to zero over every row and column",
                    self.id
                )));
            }
        }
        if self.outer_reps == 0 {
            return Err(AnovaError::InvalidParameter(format!(
                "{}: outer_reps must be positive",
                self.id
            )));
        }
        if self.tests.iter().any(|t| t.method.is_bootstrap()) {
            self.bootstrap_settings().validate()?;
        }
        self.solver.validate()?;
        for t in &self.tests {
            statistic_kind(t.target, t.method)?;
        }
        self.error_family.validate()
    }

    /// `μ_ij = μ + c·α_i + β_j + γ_ij`.
    pub fn cell_means(&self) -> Grid<f64> {
        Grid::from_fn(self.n.rows(), self.n.cols(), |i, j| {
            self.mu
                + self.effect_scale * self.alpha[i]
                + self.beta[j]
                + self.gamma.as_ref().map_or(0.0, |g| g[(i, j)])
        })
    }

    fn bootstrap_settings(&self) -> BootstrapSettings {
        BootstrapSettings {
            alpha: self.nominal_alpha,
            ..self.bootstrap
        }
    }
}

const DATA_STREAM: u64 = 0;
const BOOT_STREAM: u64 = 1;
const MC_STREAM: u64 = 2;

/// Replicate `index` of the study: `Y_ijk = μ_ij + σ_ij·ε_ijk` with
/// standardized errors, drawn cell by cell in row-major order.
pub fn generate_dataset(config: &SimulationConfig, index: usize) -> Result<RawDataset> {
    let errors = config.error_family.standardized()?;
    let means = config.cell_means();
    let mut rng = stream_rng(derive_seed(config.seed, DATA_STREAM), index as u64);
    let mut records = Vec::with_capacity(config.n.iter().sum());
    for ((i, j), &n) in config.n.indexed() {
        let sd = config.sigma2[(i, j)].sqrt();
        for _ in 0..n {
            records.push(Record {
                level_a: i + 1,
                level_b: j + 1,
                y: means[(i, j)] + sd * errors.sample(&mut rng),
            });
        }
    }
    Ok(RawDataset::new(records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: StudyTest,
    pub rejections: usize,
    /// Replicates that produced a decision.
    pub reps: usize,
    /// Replicates lost to numerical failure.
    pub failures: usize,
    pub proportion: f64,
    pub stderr: f64,
}

impl TestOutcome {
    fn new(test: StudyTest, rejections: usize, reps: usize, failures: usize) -> Self {
        let p = if reps > 0 {
            rejections as f64 / reps as f64
        } else {
            f64::NAN
        };
        TestOutcome {
            test,
            rejections,
            reps,
            failures,
            proportion: p,
            stderr: (p * (1.0 - p) / reps as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub outcomes: Vec<TestOutcome>,
}

impl SimulationResult {
    pub fn outcome(&self, target: TestTarget, method: TestMethod) -> Option<&TestOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.test.target == target && o.test.method == method)
    }
}

/// Fixed critical values that do not depend on the data.
struct FixedCriticals {
    values: Vec<Option<f64>>,
}

impl FixedCriticals {
    fn new(config: &SimulationConfig, layout: &Layout) -> Result<Self> {
        let values = config
            .tests
            .iter()
            .map(|t| {
                let (a, b) = if t.target.is_factor_b() {
                    (layout.b(), layout.a())
                } else {
                    (layout.a(), layout.b())
                };
                let (a, b) = (a as f64, b as f64);
                match (t.method, statistic_kind(t.target, t.method)?) {
                    (TestMethod::LrtAsymptotic, kind) => {
                        let df = match kind {
                            StatisticKind::LrtInteraction => (a - 1.0) * (b - 1.0),
                            StatisticKind::LrtSimpleA => (a - 1.0) * b,
                            _ => a - 1.0,
                        };
                        chi_square_critical(df, config.nominal_alpha).map(Some)
                    }
                    (TestMethod::ClassicalF, _) => {
                        let df2 = (layout.total() - layout.a() * layout.b()) as f64;
                        let f = FisherSnedecor::new(a - 1.0, df2)
                            .map_err(|_| AnovaError::InvalidDf(df2))?;
                        Ok(Some(f.inverse_cdf(1.0 - config.nominal_alpha)))
                    }
                    _ => Ok(None),
                }
            })
            .collect::<Result<_>>()?;
        Ok(FixedCriticals { values })
    }
}

/// Decisions of every test on replicate `index`; `None` marks a failure.
fn replicate_decisions(
    config: &SimulationConfig,
    layout: &Layout,
    fixed: &FixedCriticals,
    index: usize,
) -> Result<Vec<Option<bool>>> {
    let raw = generate_dataset(config, index)?;
    let table = summarize(&raw, layout)?;
    let transposed = table.transpose();
    let boot = BootstrapSettings {
        seed: derive_seed(derive_seed(config.seed, BOOT_STREAM), index as u64),
        parallel: false,
        ..config.bootstrap_settings()
    };

    // Bootstrap tests on the same orientation share one set of draws.
    let mut decisions = vec![None; config.tests.len()];
    for factor_b in [false, true] {
        let t = if factor_b { &transposed } else { &table };
        let members: Vec<(usize, StatisticKind)> = config
            .tests
            .iter()
            .enumerate()
            .filter(|(_, s)| s.method.is_bootstrap() && s.target.is_factor_b() == factor_b)
            .map(|(k, s)| Ok((k, statistic_kind(s.target, s.method)?)))
            .collect::<Result<_>>()?;
        if members.is_empty() {
            continue;
        }
        let kinds: Vec<StatisticKind> = members.iter().map(|m| m.1).collect();
        let nulls = match bootstrap_null_samples(t, &kinds, &boot, &config.solver) {
            Ok(n) => n,
            Err(e) if !e.is_input_error() => continue,
            Err(e) => return Err(e),
        };
        for ((k, kind), null) in members.into_iter().zip(nulls) {
            decisions[k] = match compute_test_scale(kind, t, &config.solver) {
                Ok(obs) => Some(null.rejects(obs, config.nominal_alpha)),
                Err(e) if !e.is_input_error() => None,
                Err(e) => return Err(e),
            };
        }
    }

    for (k, test) in config.tests.iter().enumerate() {
        if test.method.is_bootstrap() {
            continue;
        }
        let t = if test.target.is_factor_b() {
            &transposed
        } else {
            &table
        };
        let kind = statistic_kind(test.target, test.method)?;
        let observed = match compute_test_scale(kind, t, &config.solver) {
            Ok(v) => v,
            Err(e) if !e.is_input_error() => continue,
            Err(e) => return Err(e),
        };
        decisions[k] = Some(match test.method {
            TestMethod::LrtAsymptotic => {
                -2.0 * observed > fixed.values[k].expect("chi-square point")
            }
            TestMethod::ClassicalF => observed > fixed.values[k].expect("F point"),
            _ => {
                let mc = McSettings {
                    seed: derive_seed(derive_seed(config.seed, MC_STREAM), index as u64),
                    ..config.mc
                };
                observed > asymptotic_treatment_quantile(t, config.nominal_alpha, &mc)?
            }
        });
    }
    Ok(decisions)
}

fn tally(config: &SimulationConfig, all: &[Vec<Option<bool>>]) -> Vec<TestOutcome> {
    config
        .tests
        .iter()
        .enumerate()
        .map(|(k, &test)| {
            let decided: Vec<bool> = all.iter().filter_map(|d| d[k]).collect();
            let rejections = decided.iter().filter(|&&r| r).count();
            TestOutcome::new(test, rejections, decided.len(), all.len() - decided.len())
        })
        .collect()
}

/// Runs every replicate of one configuration.
pub fn run_study(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let layout = config.layout()?;
    let fixed = FixedCriticals::new(config, &layout)?;
    let all: Vec<Vec<Option<bool>>> = (0..config.outer_reps)
        .into_par_iter()
        .map(|r| replicate_decisions(config, &layout, &fixed, r))
        .collect::<Result<_>>()?;
    Ok(SimulationResult {
        config: config.clone(),
        outcomes: tally(config, &all),
    })
}

/// Header of the results CSV.
pub const RESULTS_HEADER: [&str; 8] = [
    "config",
    "test",
    "method",
    "c",
    "rejections",
    "reps",
    "proportion",
    "stderr",
];

/// Runs each configuration in turn, streaming result rows to `sink` (when
/// given) as each finishes.
pub fn size_power_grid(
    configs: &[SimulationConfig],
    sink: Option<&mut dyn Write>,
) -> Result<Vec<SimulationResult>> {
    let mut writer = match sink {
        Some(s) => {
            let mut w = csv::Writer::from_writer(s);
            w.write_record(RESULTS_HEADER)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut out = Vec::with_capacity(configs.len());
    for config in configs {
        let result = run_study(config)?;
        if let Some(w) = writer.as_mut() {
            write_result_rows(w, &result)?;
            w.flush()?;
        }
        out.push(result);
    }
    Ok(out)
}

fn write_result_rows<W: Write>(w: &mut csv::Writer<W>, result: &SimulationResult) -> Result<()> {
    for o in &result.outcomes {
        w.write_record([
            result.config.id.clone(),
            o.test.target_name().to_string(),
            o.test.method.short_name().to_string(),
            result.config.effect_scale.to_string(),
            o.rejections.to_string(),
            o.reps.to_string(),
            format!("{:.6}", o.proportion),
            format!("{:.6}", o.stderr),
        ])?;
    }
    Ok(())
}

/// Results of a finished grid as CSV text.
pub fn results_csv(results: &[SimulationResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        write_result_rows(&mut w, r)?;
    }
    let bytes = w.into_inner().map_err(|e| AnovaError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a JSON config file holding one config or a list of them.
pub fn read_configs(reader: impl std::io::Read) -> Result<Vec<SimulationConfig>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<SimulationConfig>),
        One(Box<SimulationConfig>),
    }
    let configs = match serde_json::from_reader(reader)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(c) => vec![*c],
    };
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

pub mod presets {
    //! Parameter grids of the published size and power studies.
    //!
    //! Cell vectors are listed row by row (`(1,1), (1,2), …, (a,b)`).

    use super::*;

    pub const NAMES: [&str; 13] = [
        "table1/config1",
        "table1/config2",
        "table1/config3",
        "table2/config4",
        "table2/config5",
        "table3",
        "table4",
        "table5",
        "table6",
        "figure2",
        "figure3",
        "robustness/t3",
        "robustness/all",
    ];

    fn rep(v: f64, k: usize) -> Vec<f64> {
        vec![v; k]
    }

    pub fn cell_sizes(name: &str) -> Option<Vec<usize>> {
        let v = match name {
            "N1" => vec![5; 6],
            "N2" => vec![10; 6],
            "N3" => vec![3, 3, 4, 5, 6, 6],
            "N4" => vec![4, 6, 8, 12, 16, 20],
            "N5" => vec![25; 6],
            "N6" => vec![30, 20, 25, 35, 40, 30],
            "N7" => vec![20, 25, 30, 35, 40, 45],
            "N8" => vec![45, 40, 35, 30, 25, 20],
            "N9" => vec![5; 18],
            "N10" => vec![10; 18],
            "N11" => vec![3, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 6, 6, 6, 6, 6],
            "N12" => vec![
                4, 4, 4, 6, 6, 6, 8, 8, 8, 12, 12, 12, 16, 16, 16, 20, 20, 20,
            ],
            "N15" => vec![10, 12, 14, 10, 12, 14],
            "N16" => vec![6, 7, 8, 9, 10, 11],
            "N17" => [10, 12, 14, 16].repeat(4),
            "N18" => vec![8, 6, 7, 9, 10, 12, 14, 16, 10, 11, 12, 13, 8, 6, 7, 9],
            "N21" => vec![10; 6],
            "N22" => vec![10, 10, 5, 5, 15, 15],
            "N23" => [vec![15; 6], vec![20; 6], vec![25; 6]].concat(),
            "N24" => (15..=32).collect(),
            _ => return None,
        };
        Some(v)
    }

    pub fn cell_variances(name: &str) -> Option<Vec<f64>> {
        let v = match name {
            "rho1" => rep(1.0, 6),
            "rho2" | "rho16" => [rep(0.1, 3), rep(0.5, 3)].concat(),
            "rho3" => [rep(1.0, 3), rep(0.5, 3)].concat(),
            "rho4" => vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
            "rho5" | "rho17" => vec![0.3, 0.9, 0.4, 0.7, 0.5, 1.0],
            "rho6" => rep(1.0, 18),
            "rho7" => (1..=9).flat_map(|k| rep(k as f64 / 10.0, 2)).collect(),
            "rho8" => [[0.1, 0.2, 0.3, 0.4, 0.5].repeat(3), vec![0.2, 0.3, 2.0]].concat(),
            "rho9" => [0.1, 0.2, 0.4, 0.6, 0.8, 1.0]
                .iter()
                .flat_map(|&v| rep(v, 3))
                .collect(),
            "rho10" => vec![
                0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3,
                0.2, 1.0,
            ],
            "rho11" => vec![
                0.01, 0.01, 0.01, 0.05, 0.05, 0.05, 0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 0.6, 0.6, 0.6,
                0.8, 0.8, 1.0,
            ],
            "rho12" => vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0],
            "rho13" => rep(2.0, 6),
            "rho14" => [1.0, 2.0, 3.0, 4.0].repeat(4),
            "rho15" => rep(1.0, 16),
            "rho18" => vec![
                0.1, 0.1, 0.2, 0.2, 0.3, 0.3, 0.4, 0.4, 0.5, 0.5, 0.6, 0.6, 0.7, 0.7, 0.8, 0.8,
                0.9, 1.0,
            ],
            "rho19" => vec![
                0.01, 0.01, 0.01, 0.05, 0.05, 0.05, 0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 0.6, 0.6, 0.6,
                0.8, 0.8, 1.0,
            ],
            _ => return None,
        };
        Some(v)
    }

    fn grid<T: Clone>(a: usize, b: usize, v: Vec<T>) -> Grid<T> {
        Grid::from_row_major(a, b, v).expect("preset vector matches its layout")
    }

    fn treatment(methods: &[TestMethod]) -> Vec<StudyTest> {
        methods
            .iter()
            .map(|&m| StudyTest::new(TestTarget::TreatmentA, m))
            .collect()
    }

    /// Null-true config for `(a, b)` built from named size and variance
    /// vectors.
    pub fn named(
        a: usize,
        b: usize,
        n: &str,
        rho: &str,
        tests: Vec<StudyTest>,
    ) -> SimulationConfig {
        let sizes = cell_sizes(n).expect("known size vector");
        let vars = cell_variances(rho).expect("known variance vector");
        SimulationConfig::new(
            format!("{n}/{rho}"),
            grid(a, b, sizes),
            grid(a, b, vars),
            tests,
        )
    }

    fn size_grid(
        a: usize,
        b: usize,
        ns: &[&str],
        rhos: &[&str],
        methods: &[TestMethod],
        prefix: &str,
    ) -> Vec<SimulationConfig> {
        ns.iter()
            .flat_map(|n| {
                rhos.iter().map(move |rho| {
                    let mut c = named(a, b, n, rho, treatment(methods));
                    c.id = format!("{prefix}/{}", c.id);
                    c
                })
            })
            .collect()
    }

    fn curve(base: &SimulationConfig, cs: &[f64]) -> Vec<SimulationConfig> {
        cs.iter()
            .map(|&c| SimulationConfig {
                id: base.id.clone(),
                effect_scale: c,
                ..base.clone()
            })
            .collect()
    }

    fn steps(lo: f64, hi: f64, by: f64) -> Vec<f64> {
        let k = ((hi - lo) / by).round() as usize;
        (0..=k).map(|i| lo + i as f64 * by).collect()
    }

    use TestMethod::{ClassicalF, LrtAsymptotic, LrtBoot, MctAsymptotic, MctBoot};

    fn config1() -> Vec<SimulationConfig> {
        size_grid(
            2,
            3,
            &["N1", "N2", "N3", "N4"],
            &["rho1", "rho2", "rho3", "rho4", "rho5"],
            &[LrtBoot, MctBoot, ClassicalF],
            "config1",
        )
    }

    fn config2() -> Vec<SimulationConfig> {
        size_grid(
            2,
            3,
            &["N5", "N6", "N7", "N8"],
            &["rho1", "rho2", "rho3", "rho4", "rho5"],
            &[LrtBoot, LrtAsymptotic, MctBoot, MctAsymptotic, ClassicalF],
            "config2",
        )
    }

    fn config3() -> Vec<SimulationConfig> {
        size_grid(
            6,
            3,
            &["N9", "N10", "N11", "N12"],
            &["rho6", "rho7", "rho8", "rho9", "rho10", "rho11"],
            &[LrtBoot, MctBoot, ClassicalF],
            "config3",
        )
    }

    fn config4() -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        for n in ["N15", "N16"] {
            for rho in ["rho12", "rho13"] {
                let mut base = named(3, 2, n, rho, treatment(&[LrtBoot, MctBoot, ClassicalF]));
                base.id = format!("config4/{}", base.id);
                base.alpha = vec![0.0, -0.2, 0.2];
                out.extend(curve(&base, &steps(0.0, 4.0, 0.25)));
            }
        }
        out
    }

    fn config5() -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        for n in ["N17", "N18"] {
            for rho in ["rho14", "rho15"] {
                let mut base = named(4, 4, n, rho, treatment(&[LrtBoot, MctBoot, ClassicalF]));
                base.id = format!("config5/{}", base.id);
                base.alpha = vec![1.0, 1.1, 1.2, 1.3];
                base.beta = vec![-0.1, 0.1, 0.2, 0.2];
                out.extend(curve(&base, &steps(0.0, 10.0, 1.0)));
            }
        }
        out
    }

    const ALTERNATIVES: [(f64, f64); 6] = [
        (0.0, 0.0),
        (-0.1, 0.1),
        (0.0, 0.4),
        (0.0, 0.6),
        (0.0, 0.8),
        (0.0, 1.0),
    ];

    fn power_table(
        a: usize,
        b: usize,
        rhos: [&str; 2],
        ns: [&str; 2],
        prefix: &str,
    ) -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        for (rho, n) in [
            (rhos[0], ns[0]),
            (rhos[1], ns[0]),
            (rhos[0], ns[1]),
            (rhos[1], ns[1]),
        ] {
            for (x, y) in ALTERNATIVES {
                let mut c = named(a, b, n, rho, treatment(&[LrtBoot, MctBoot, ClassicalF]));
                c.alpha[a - 2] = x;
                c.alpha[a - 1] = y;
                c.id = format!("{prefix}/{rho}/{n}/({x},{y})");
                out.push(c);
            }
        }
        out
    }

    /// Student-t, Weibull, Laplace and normal-mixture errors on balanced
    /// `3 × 2` cells of 25 with variances `(1,2,3,1,2,3)`.
    pub fn robustness(families: &[ErrorFamily]) -> Vec<SimulationConfig> {
        families
            .iter()
            .map(|&f| {
                let mut c = SimulationConfig::new(
                    format!("robustness/{}", f),
                    Grid::filled(3, 2, 25),
                    grid(3, 2, cell_variances("rho12").expect("known")),
                    treatment(&[LrtBoot, MctBoot]),
                );
                c.error_family = f;
                c
            })
            .collect()
    }

    pub const ROBUSTNESS_FAMILIES: [ErrorFamily; 4] = [
        ErrorFamily::StudentT { df: 3.0 },
        ErrorFamily::Weibull {
            shape: 5.0,
            scale: 1.0,
        },
        ErrorFamily::Laplace {
            location: 0.0,
            scale: 5.0,
        },
        ErrorFamily::NormalMixture {
            p: 0.5,
            m1: 1.0,
            v1: 2.0,
            m2: 2.0,
            v2: 4.0,
        },
    ];

    /// Configurations of a named preset.
    pub fn preset(name: &str) -> Result<Vec<SimulationConfig>> {
        Ok(match name {
            "table1/config1" | "table3" => config1(),
            "table1/config2" | "table4" => config2(),
            "table1/config3" => config3(),
            "table2/config4" | "figure2" => config4(),
            "table2/config5" | "figure3" => config5(),
            "table5" => power_table(2, 3, ["rho16", "rho17"], ["N21", "N22"], "table5"),
            "table6" => power_table(6, 3, ["rho18", "rho19"], ["N23", "N24"], "table6"),
            "robustness/t3" => robustness(&ROBUSTNESS_FAMILIES[..1]),
            "robustness/all" => robustness(&ROBUSTNESS_FAMILIES),
            _ => {
                return Err(AnovaError::InvalidParameter(format!(
                    "unknown preset {name:?}; available: {}",
                    NAMES.join(", ")
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(tests: Vec<StudyTest>) -> SimulationConfig {
        let mut c = presets::named(2, 3, "N2", "rho4", tests);
        c.outer_reps = 30;
        c.bootstrap.replicates = 100;
        c.seed = 5;
        c
    }

    #[test]
    fn every_preset_is_valid() {
        for name in presets::NAMES {
            let configs = presets::preset(name).unwrap();
            assert!(!configs.is_empty(), "{name}");
            for c in &configs {
                c.validate()
                    .unwrap_or_else(|e| panic!("{name}/{}: {e}", c.id));
            }
        }
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = presets::preset("table9").unwrap_err().to_string();
        assert!(err.contains("table1/config1"));
    }

    #[test]
    fn non_zero_sum_gamma_rejected() {
        let mut c = quick(vec![]);
        c.gamma = Some(Grid::from_rows(vec![vec![1.0, 0.0, -1.0], vec![0.0, 0.0, 0.0]]).unwrap());
        assert!(c.validate().is_err());
        c.gamma = Some(Grid::from_rows(vec![vec![1.0, 0.0, -1.0], vec![-1.0, 0.0, 1.0]]).unwrap());
        c.validate().unwrap();
    }

    #[test]
    fn datasets_are_reproducible_and_distinct() {
        let c = quick(vec![]);
        assert_eq!(
            generate_dataset(&c, 3).unwrap(),
            generate_dataset(&c, 3).unwrap()
        );
        assert_ne!(
            generate_dataset(&c, 3).unwrap(),
            generate_dataset(&c, 4).unwrap()
        );
        assert_eq!(generate_dataset(&c, 0).unwrap().records.len(), 60);
    }

    #[test]
    fn single_replicate_gives_zero_or_one() {
        let mut c = quick(vec![StudyTest::new(
            TestTarget::TreatmentA,
            TestMethod::LrtAsymptotic,
        )]);
        c.outer_reps = 1;
        let r = run_study(&c).unwrap();
        let p = r.outcomes[0].proportion;
        assert!(p == 0.0 || p == 1.0);
    }

    #[test]
    fn study_is_thread_count_independent() {
        let c = quick(vec![
            StudyTest::new(TestTarget::TreatmentA, TestMethod::LrtBoot),
            StudyTest::new(TestTarget::TreatmentB, TestMethod::MctBoot),
            StudyTest::new(TestTarget::TreatmentA, TestMethod::MctAsymptotic),
        ]);
        let one = crate::bootstrap::with_threads(Some(1), || run_study(&c).unwrap());
        let many = crate::bootstrap::with_threads(Some(3), || run_study(&c).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn mixture_moments() {
        let f = ErrorFamily::NormalMixture {
            p: 0.5,
            m1: 1.0,
            v1: 2.0,
            m2: 2.0,
            v2: 4.0,
        };
        let (m, v) = f.moments();
        assert_eq!(m, 1.5);
        assert_eq!(v, 0.5 * 3.0 + 0.5 * 8.0 - 2.25);
    }

    #[test]
    fn family_params_checked() {
        assert!(ErrorFamily::StudentT { df: 2.0 }.validate().is_err());
        assert!(ErrorFamily::Weibull {
            shape: 0.0,
            scale: 1.0
        }
        .standardized()
        .is_err());
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let mut out = Vec::new();
        let r = size_power_grid(&[], Some(&mut out)).unwrap();
        assert!(r.is_empty());
        assert_eq!(
            String::from_utf8(out).unwrap().trim(),
            RESULTS_HEADER.join(",")
        );
    }
}
