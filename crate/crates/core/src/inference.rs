//! End-to-end tests, pairwise decisions and simultaneous intervals.
//!
//! Factor-B targets are evaluated on the transposed table. For max-type
//! tests, a single null sample feeds the global decision, the pairwise
//! decisions and the intervals, so the three always agree.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::asymptotic::{build_sigma_t, chi_square_critical, equicoordinate_quantile, McSettings};
use crate::bootstrap::{bootstrap_null_samples, validate_alpha, BootstrapSettings, NullSample};
use crate::data::CellSummaryTable;
use crate::error::{AnovaError, Result};
use crate::mle::{fit_null_no_interaction, fit_null_no_simple_a, SolverSettings};
use crate::stats::{
    compute, for_each_interaction_contrast, for_each_simple_a_contrast,
    for_each_treatment_contrast, StatisticKind, StatisticValue, Tail,
};

/// Version tag of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestTarget {
    Interaction,
    SimpleA,
    SimpleB,
    TreatmentA,
    TreatmentB,
}

impl TestTarget {
    pub const ALL: [TestTarget; 5] = [
        TestTarget::Interaction,
        TestTarget::SimpleA,
        TestTarget::SimpleB,
        TestTarget::TreatmentA,
        TestTarget::TreatmentB,
    ];

    pub fn is_factor_b(self) -> bool {
        matches!(self, TestTarget::SimpleB | TestTarget::TreatmentB)
    }

    pub fn is_treatment(self) -> bool {
        matches!(self, TestTarget::TreatmentA | TestTarget::TreatmentB)
    }

    /// The factor-A target evaluated on the (possibly transposed) table.
    fn base(self) -> TestTarget {
        match self {
            TestTarget::SimpleB => TestTarget::SimpleA,
            TestTarget::TreatmentB => TestTarget::TreatmentA,
            t => t,
        }
    }

    pub fn family(self) -> CiFamily {
        match self.base() {
            TestTarget::Interaction => CiFamily::InteractionPairs,
            TestTarget::SimpleA => CiFamily::SimpleAPairs,
            _ => CiFamily::TreatmentAPairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestMethod {
    LrtBoot,
    MctBoot,
    LrtAsymptotic,
    MctAsymptotic,
    /// Homoscedastic F test; treatment targets only.
    ClassicalF,
}

impl TestMethod {
    pub fn is_bootstrap(self) -> bool {
        matches!(self, TestMethod::LrtBoot | TestMethod::MctBoot)
    }

    pub fn is_mct(self) -> bool {
        matches!(self, TestMethod::MctBoot | TestMethod::MctAsymptotic)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            TestMethod::LrtBoot => "lrt",
            TestMethod::MctBoot => "mct",
            TestMethod::LrtAsymptotic => "alrt",
            TestMethod::MctAsymptotic => "amct",
            TestMethod::ClassicalF => "f",
        }
    }
}

/// Statistic computed by `method` for `target`, on the factor-A side.
pub fn statistic_kind(target: TestTarget, method: TestMethod) -> Result<StatisticKind> {
    use StatisticKind::*;
    let base = target.base();
    let kind = match (base, method) {
        (TestTarget::Interaction, TestMethod::LrtBoot | TestMethod::LrtAsymptotic) => {
            LrtInteraction
        }
        (TestTarget::SimpleA, TestMethod::LrtBoot | TestMethod::LrtAsymptotic) => LrtSimpleA,
        (TestTarget::TreatmentA, TestMethod::LrtBoot | TestMethod::LrtAsymptotic) => LrtTreatmentA,
        (TestTarget::Interaction, TestMethod::MctBoot) => MctInteraction,
        (TestTarget::SimpleA, TestMethod::MctBoot) => MctSimpleA,
        (TestTarget::TreatmentA, TestMethod::MctBoot | TestMethod::MctAsymptotic) => MctTreatmentA,
        (TestTarget::TreatmentA, TestMethod::ClassicalF) => ClassicalFA,
        _ => {
            return Err(AnovaError::UnsupportedCombination(format!(
                "method {method:?} is only defined for treatment targets, not {target:?}"
            )))
        }
    };
    Ok(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Reject,
    FailToReject,
}

impl Decision {
    pub fn from_bool(reject: bool) -> Self {
        if reject {
            Decision::Reject
        } else {
            Decision::FailToReject
        }
    }

    pub fn is_reject(self) -> bool {
        self == Decision::Reject
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRequest {
    pub target: TestTarget,
    pub method: TestMethod,
    pub alpha: f64,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Monte Carlo settings for the equicoordinate quantile.
    #[serde(default)]
    pub mc: McSettings,
}

impl TestRequest {
    /// Defaults: `alpha = 0.05`, `H = 5000`, seed 0.
    pub fn new(target: TestTarget, method: TestMethod) -> Self {
        TestRequest {
            target,
            method,
            alpha: 0.05,
            bootstrap: BootstrapSettings::default(),
            solver: SolverSettings::default(),
            mc: McSettings::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.bootstrap.seed = seed;
        self
    }

    pub fn with_replicates(mut self, h: usize) -> Self {
        self.bootstrap.replicates = h;
        self
    }

    fn bootstrap_settings(&self) -> BootstrapSettings {
        BootstrapSettings {
            alpha: self.alpha,
            ..self.bootstrap
        }
    }
}

/// Scale on which `observed` and `critical_value` of a report are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportScale {
    /// `λ`; reject below the critical value.
    Lambda,
    /// `-2 ln λ`; reject above the chi-square point.
    Deviance,
    /// Max-type statistic; reject above.
    MaxAbs,
    /// F ratio; reject above.
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Iterations of each restricted fit on the observed table.
    pub solver_iterations: BTreeMap<String, usize>,
    pub nonconverged_redraws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<Vec<f64>>,
}

/// One `H_0: θ_k = θ_l` decision from a max-type test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDecision {
    pub label: String,
    /// Standardized contrast.
    pub statistic: f64,
    pub critical_value: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: String,
    pub version: String,
    pub request: TestRequest,
    pub statistic: StatisticValue,
    pub scale: ReportScale,
    pub tail: Tail,
    /// Observed statistic on `scale`.
    pub observed: f64,
    pub critical_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<PairDecision>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<SimultaneousCi>,
    pub diagnostics: Diagnostics,
    /// Bootstrap null values on the statistic's natural scale.
    #[serde(skip)]
    pub null_sample: Option<Vec<f64>>,
}

impl TestReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn restricted_fit_iterations(
    summary: &CellSummaryTable,
    kind: StatisticKind,
    solver: &SolverSettings,
) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    if matches!(
        kind,
        StatisticKind::LrtInteraction | StatisticKind::LrtTreatmentA
    ) {
        out.insert(
            "no_interaction".to_string(),
            fit_null_no_interaction(summary, solver)?.iterations,
        );
    }
    if matches!(
        kind,
        StatisticKind::LrtSimpleA | StatisticKind::LrtTreatmentA
    ) {
        out.insert(
            "no_simple_a".to_string(),
            fit_null_no_simple_a(summary, solver)?.iterations,
        );
    }
    Ok(out)
}

/// Runs one complete test.
pub fn run_test(summary: &CellSummaryTable, request: &TestRequest) -> Result<TestReport> {
    validate_alpha(request.alpha)?;
    request.solver.validate()?;
    let kind = statistic_kind(request.target, request.method)?;
    let table = if request.target.is_factor_b() {
        summary.transpose()
    } else {
        summary.clone()
    };
    table.ensure_nondegenerate()?;
    let mut statistic = compute(kind, &table, &request.solver)?;
    if request.target.is_factor_b() {
        relabel_factor_b(&mut statistic, &table, request.target);
    }
    let diagnostics = Diagnostics {
        solver_iterations: restricted_fit_iterations(&table, kind, &request.solver)?,
        nonconverged_redraws: 0,
        seed: None,
        replicates: None,
        mc_draws: None,
        mc_seed: None,
        df: None,
    };
    let base = BaseReport {
        request: *request,
        statistic,
        diagnostics,
    };
    match request.method {
        TestMethod::LrtBoot | TestMethod::MctBoot => bootstrap_report(&table, kind, base),
        TestMethod::LrtAsymptotic => Ok(alrt_report(&table, base)?),
        TestMethod::MctAsymptotic => amct_report(&table, base),
        TestMethod::ClassicalF => f_report(&table, base),
    }
}

struct BaseReport {
    request: TestRequest,
    statistic: StatisticValue,
    diagnostics: Diagnostics,
}

impl BaseReport {
    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        scale: ReportScale,
        tail: Tail,
        observed: f64,
        critical_value: f64,
        p_value: Option<f64>,
        reject: bool,
        intervals: Option<SimultaneousCi>,
        null_sample: Option<Vec<f64>>,
    ) -> TestReport {
        let pairwise = intervals.as_ref().map(|ci| ci.pair_decisions());
        TestReport {
            schema_version: REPORT_SCHEMA_VERSION.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            request: self.request,
            statistic: self.statistic,
            scale,
            tail,
            observed,
            critical_value,
            p_value,
            decision: Decision::from_bool(reject),
            pairwise,
            intervals,
            diagnostics: self.diagnostics,
            null_sample,
        }
    }
}

fn bootstrap_report(
    table: &CellSummaryTable,
    kind: StatisticKind,
    mut base: BaseReport,
) -> Result<TestReport> {
    let settings = base.request.bootstrap_settings();
    let null = bootstrap_null_samples(table, &[kind], &settings, &base.request.solver)?.remove(0);
    let observed_ts = base.statistic.test_scale();
    base.diagnostics.nonconverged_redraws = null.nonconverged_redraws;
    base.diagnostics.seed = Some(settings.seed);
    base.diagnostics.replicates = Some(settings.replicates);
    let intervals = if kind.is_mct() {
        let mut ci = intervals_with_multiplier(
            table,
            base.request.target.family(),
            settings.alpha,
            null.critical_value(settings.alpha),
        );
        if base.request.target.is_factor_b() {
            relabel_intervals(&mut ci, table, base.request.target);
        }
        Some(ci)
    } else {
        None
    };
    let (scale, observed) = if kind.is_lrt() {
        (ReportScale::Lambda, base.statistic.value)
    } else {
        (ReportScale::MaxAbs, observed_ts)
    };
    let critical = null.critical_value(settings.alpha);
    let p = null.p_value(observed_ts);
    let reject = null.rejects(observed_ts, settings.alpha);
    Ok(base.finish(
        scale,
        kind.tail(),
        observed,
        critical,
        Some(p),
        reject,
        intervals,
        Some(null.values()),
    ))
}

fn alrt_report(table: &CellSummaryTable, mut base: BaseReport) -> Result<TestReport> {
    let kind = base.statistic.kind;
    let (a, b) = (table.a() as f64, table.b() as f64);
    let df = match kind {
        StatisticKind::LrtInteraction => (a - 1.0) * (b - 1.0),
        StatisticKind::LrtSimpleA => (a - 1.0) * b,
        _ => a - 1.0,
    };
    let observed = base.statistic.deviance().unwrap_or(0.0);
    let critical = chi_square_critical(df, base.request.alpha)?;
    base.diagnostics.df = Some(vec![df]);
    Ok(base.finish(
        ReportScale::Deviance,
        Tail::Upper,
        observed,
        critical,
        None,
        observed > critical,
        None,
        None,
    ))
}

fn amct_report(table: &CellSummaryTable, mut base: BaseReport) -> Result<TestReport> {
    let alpha = base.request.alpha;
    let d = asymptotic_treatment_quantile(table, alpha, &base.request.mc)?;
    base.diagnostics.mc_draws = Some(base.request.mc.draws);
    base.diagnostics.mc_seed = Some(base.request.mc.seed);
    let mut ci = intervals_with_multiplier(table, CiFamily::TreatmentAPairs, alpha, d);
    if base.request.target.is_factor_b() {
        relabel_intervals(&mut ci, table, base.request.target);
    }
    let observed = base.statistic.value;
    Ok(base.finish(
        ReportScale::MaxAbs,
        Tail::Upper,
        observed,
        d,
        None,
        observed > d,
        Some(ci),
        None,
    ))
}

fn f_report(table: &CellSummaryTable, mut base: BaseReport) -> Result<TestReport> {
    let df1 = (table.a() - 1) as f64;
    let df2 = (table.layout().total() - table.a() * table.b()) as f64;
    let f = FisherSnedecor::new(df1, df2).map_err(|_| AnovaError::InvalidDf(df2))?;
    let critical = f.inverse_cdf(1.0 - base.request.alpha);
    let observed = base.statistic.value;
    base.diagnostics.df = Some(vec![df1, df2]);
    Ok(base.finish(
        ReportScale::F,
        Tail::Upper,
        observed,
        critical,
        Some(f.sf(observed)),
        observed > critical,
        None,
        None,
    ))
}

/// Equicoordinate quantile of the plug-in `Σ_T` for the treatment family.
pub fn asymptotic_treatment_quantile(
    table: &CellSummaryTable,
    alpha: f64,
    mc: &McSettings,
) -> Result<f64> {
    let cov = build_sigma_t(table)?;
    equicoordinate_quantile(&cov, alpha, mc.draws, mc.seed)
}

fn relabel_factor_b(stat: &mut StatisticValue, transposed: &CellSummaryTable, target: TestTarget) {
    if let Some(detail) = stat.detail.as_mut() {
        for (c, label) in detail.iter_mut().zip(factor_b_labels(transposed, target)) {
            c.label = label;
        }
    }
}

fn relabel_intervals(ci: &mut SimultaneousCi, transposed: &CellSummaryTable, target: TestTarget) {
    for (iv, label) in ci
        .intervals
        .iter_mut()
        .zip(factor_b_labels(transposed, target))
    {
        iv.label = label;
    }
}

/// Labels in original (A, B) cell coordinates for contrasts computed on the
/// transposed table.
fn factor_b_labels(t: &CellSummaryTable, target: TestTarget) -> Vec<String> {
    let mut out = Vec::new();
    match target {
        TestTarget::TreatmentB => for_each_treatment_contrast(t, |j, k, _, _| {
            out.push(format!("beta{}-beta{}", j + 1, k + 1))
        }),
        TestTarget::SimpleB => for_each_simple_a_contrast(t, |j1, j2, i, _, _| {
            out.push(format!("nu{}{}-nu{}{}", i + 1, j1 + 1, i + 1, j2 + 1))
        }),
        _ => {}
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CiFamily {
    InteractionPairs,
    SimpleAPairs,
    TreatmentAPairs,
}

impl CiFamily {
    /// Max-type statistic whose null distribution supplies the multiplier.
    pub fn statistic(self) -> StatisticKind {
        match self {
            CiFamily::InteractionPairs => StatisticKind::MctInteraction,
            CiFamily::SimpleAPairs => StatisticKind::MctSimpleA,
            CiFamily::TreatmentAPairs => StatisticKind::MctTreatmentA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
    /// Standardized contrast `estimate / se`.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousCi {
    pub family: CiFamily,
    pub level: f64,
    /// Critical value multiplying each standard error.
    pub multiplier: f64,
    pub intervals: Vec<Interval>,
}

impl SimultaneousCi {
    pub fn pair_decisions(&self) -> Vec<PairDecision> {
        self.intervals
            .iter()
            .map(|iv| PairDecision {
                label: iv.label.clone(),
                statistic: iv.statistic,
                critical_value: self.multiplier,
                decision: Decision::from_bool(iv.significant),
            })
            .collect()
    }

    /// CSV with header `label,estimate,lower,upper,significant`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "estimate", "lower", "upper", "significant"])?;
        for iv in &self.intervals {
            w.write_record([
                iv.label.clone(),
                iv.estimate.to_string(),
                iv.lower.to_string(),
                iv.upper.to_string(),
                iv.significant.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| AnovaError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `estimate ± multiplier·se` for every contrast of `family`.
pub fn intervals_with_multiplier(
    summary: &CellSummaryTable,
    family: CiFamily,
    alpha: f64,
    multiplier: f64,
) -> SimultaneousCi {
    let mut intervals = Vec::new();
    let mut push = |label: String, est: f64, se: f64| {
        let half = multiplier * se;
        let (lower, upper) = (est - half, est + half);
        intervals.push(Interval {
            label,
            estimate: est,
            lower,
            upper,
            significant: lower > 0.0 || upper < 0.0,
            statistic: est / se,
        });
    };
    match family {
        CiFamily::InteractionPairs => for_each_interaction_contrast(summary, |i, j1, j2, e, s| {
            push(format!("g{}{}-g{}{}", i + 1, j1 + 1, i + 1, j2 + 1), e, s)
        }),
        CiFamily::SimpleAPairs => for_each_simple_a_contrast(summary, |i1, i2, j, e, s| {
            push(format!("nu{}{}-nu{}{}", i1 + 1, j + 1, i2 + 1, j + 1), e, s)
        }),
        CiFamily::TreatmentAPairs => for_each_treatment_contrast(summary, |i, k, e, s| {
            push(format!("alpha{}-alpha{}", i + 1, k + 1), e, s)
        }),
    }
    SimultaneousCi {
        family,
        level: 1.0 - alpha,
        multiplier,
        intervals,
    }
}

/// Intervals whose multiplier is the `(1 − α)` quantile of an existing null
/// sample of the family's max-type statistic.
pub fn simultaneous_ci_from_null(
    summary: &CellSummaryTable,
    family: CiFamily,
    alpha: f64,
    null: &NullSample,
) -> Result<SimultaneousCi> {
    validate_alpha(alpha)?;
    if null.kind != family.statistic() {
        return Err(AnovaError::InvalidParameter(format!(
            "null sample is for {:?}, family needs {:?}",
            null.kind,
            family.statistic()
        )));
    }
    Ok(intervals_with_multiplier(
        summary,
        family,
        alpha,
        null.critical_value(alpha),
    ))
}

/// Bootstrap simultaneous confidence intervals.
pub fn simultaneous_ci(
    summary: &CellSummaryTable,
    family: CiFamily,
    alpha: f64,
    bootstrap: &BootstrapSettings,
    solver: &SolverSettings,
) -> Result<SimultaneousCi> {
    let settings = BootstrapSettings {
        alpha,
        ..*bootstrap
    };
    let null = bootstrap_null_samples(summary, &[family.statistic()], &settings, solver)?.remove(0);
    simultaneous_ci_from_null(summary, family, alpha, &null)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CriticalSource {
    Bootstrap(BootstrapSettings),
    Asymptotic(McSettings),
}

/// `H_0: α_i = α_i'` for every pair, rejected iff `|T_ii'| > d`.
pub fn pairwise_decisions(
    summary: &CellSummaryTable,
    alpha: f64,
    source: &CriticalSource,
    solver: &SolverSettings,
) -> Result<Vec<PairDecision>> {
    let d = match source {
        CriticalSource::Bootstrap(b) => {
            let settings = BootstrapSettings { alpha, ..*b };
            bootstrap_null_samples(summary, &[StatisticKind::MctTreatmentA], &settings, solver)?[0]
                .critical_value(alpha)
        }
        CriticalSource::Asymptotic(mc) => asymptotic_treatment_quantile(summary, alpha, mc)?,
    };
    Ok(intervals_with_multiplier(summary, CiFamily::TreatmentAPairs, alpha, d).pair_decisions())
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.request;
        let rows: Vec<(&str, String)> = [
            Some(("target", format!("{:?}", r.target))),
            Some(("method", r.method.short_name().to_string())),
            Some(("alpha", r.alpha.to_string())),
            Some((
                "statistic",
                format!(
                    "{} = {}",
                    self.statistic.kind.symbol(),
                    fmt_num(self.statistic.value)
                ),
            )),
            self.statistic
                .deviance()
                .map(|d| ("-2 ln lambda", fmt_num(d))),
            Some(("scale", format!("{:?}", self.scale).to_lowercase())),
            Some(("observed", fmt_num(self.observed))),
            Some(("critical value", fmt_num(self.critical_value))),
            self.p_value.map(|p| ("p-value", fmt_num(p))),
            Some((
                "decision",
                match self.decision {
                    Decision::Reject => "REJECT".to_string(),
                    Decision::FailToReject => "FAIL_TO_REJECT".to_string(),
                },
            )),
            self.diagnostics.seed.map(|s| ("seed", s.to_string())),
            self.diagnostics
                .replicates
                .map(|h| ("replicates", h.to_string())),
            self.diagnostics
                .mc_draws
                .map(|m| ("mc draws", m.to_string())),
            self.diagnostics.df.as_ref().map(|df| {
                (
                    "df",
                    df.iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join(", "),
                )
            }),
        ]
        .into_iter()
        .flatten()
        .collect();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        for (name, n) in &self.diagnostics.solver_iterations {
            writeln!(f, "{:<width$}  {n}", format!("iter {name}"))?;
        }
        if let Some(ci) = &self.intervals {
            writeln!(f)?;
            write!(f, "{ci}")?;
        }
        Ok(())
    }
}

impl fmt::Display for SimultaneousCi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:.0}% simultaneous intervals ({:?}, multiplier {:.4})",
            100.0 * self.level,
            self.family,
            self.multiplier
        )?;
        let w = self
            .intervals
            .iter()
            .map(|i| i.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        writeln!(
            f,
            "{:<w$}  {:>10}  {:>10}  {:>10}  sig",
            "label", "estimate", "lower", "upper"
        )?;
        for iv in &self.intervals {
            writeln!(
                f,
                "{:<w$}  {:>10.4}  {:>10.4}  {:>10.4}  {}",
                iv.label,
                iv.estimate,
                iv.lower,
                iv.upper,
                if iv.significant { "*" } else { "" }
            )?;
        }
        Ok(())
    }
}
