//! Test statistics computed from cell summaries.
//!
//! Likelihood-ratio statistics are products of variance ratios raised to
//! `n_ij/2`; they are accumulated in log space and carried as `ln λ` so that
//! tiny ratios never underflow. Max-type statistics are maxima of absolute
//! standardized pairwise contrasts, using unbiased variances in every
//! standard error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::CellSummaryTable;
use crate::error::{AnovaError, Result};
use crate::grid::Grid;
use crate::mle::{
    fit_full, fit_null_no_interaction, fit_null_no_interaction_above, fit_null_no_simple_a,
    SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `λ_AB`: no interaction vs. unrestricted.
    LrtInteraction,
    /// `λ_A*`: no simple A effects vs. unrestricted.
    LrtSimpleA,
    /// `λ_A`: no A effects vs. additive model.
    LrtTreatmentA,
    /// `Q`: max over interaction contrasts.
    MctInteraction,
    /// `R`: max over within-column row differences.
    MctSimpleA,
    /// `T`: max over standardized row-mean differences.
    MctTreatmentA,
    /// Homoscedastic two-way F for factor A (baseline only).
    ClassicalFA,
}

/// Which side of the null distribution leads to rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

impl StatisticKind {
    pub const PROPOSED: [StatisticKind; 6] = [
        StatisticKind::LrtInteraction,
        StatisticKind::LrtSimpleA,
        StatisticKind::LrtTreatmentA,
        StatisticKind::MctInteraction,
        StatisticKind::MctSimpleA,
        StatisticKind::MctTreatmentA,
    ];

    pub fn is_lrt(self) -> bool {
        matches!(
            self,
            StatisticKind::LrtInteraction
                | StatisticKind::LrtSimpleA
                | StatisticKind::LrtTreatmentA
        )
    }

    pub fn is_mct(self) -> bool {
        matches!(
            self,
            StatisticKind::MctInteraction
                | StatisticKind::MctSimpleA
                | StatisticKind::MctTreatmentA
        )
    }

    pub fn tail(self) -> Tail {
        if self.is_lrt() {
            Tail::Lower
        } else {
            Tail::Upper
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            StatisticKind::LrtInteraction => "lambda_AB",
            StatisticKind::LrtSimpleA => "lambda_A*",
            StatisticKind::LrtTreatmentA => "lambda_A",
            StatisticKind::MctInteraction => "Q",
            StatisticKind::MctSimpleA => "R",
            StatisticKind::MctTreatmentA => "T",
            StatisticKind::ClassicalFA => "F_A",
        }
    }
}

/// One standardized pairwise contrast of a max-type statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub label: String,
    /// Unstandardized contrast estimate.
    pub estimate: f64,
    /// Its standard error (the contrast's denominator).
    pub se: f64,
    /// `estimate / se`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub kind: StatisticKind,
    /// `λ` for likelihood ratios, the maximum `|contrast|` for max-type tests.
    pub value: f64,
    /// `ln λ` for likelihood ratios.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Vec<Contrast>>,
}

impl StatisticValue {
    fn lrt(kind: StatisticKind, log_lambda: f64) -> Self {
        StatisticValue {
            kind,
            value: log_lambda.exp(),
            log_value: Some(log_lambda),
            detail: None,
        }
    }

    fn mct(kind: StatisticKind, detail: Vec<Contrast>) -> Self {
        let value = detail.iter().map(|c| c.value.abs()).fold(0.0, f64::max);
        StatisticValue {
            kind,
            value,
            log_value: None,
            detail: Some(detail),
        }
    }

    /// `-2 ln λ` for likelihood ratios.
    pub fn deviance(&self) -> Option<f64> {
        self.log_value.map(|l| -2.0 * l)
    }

    /// Value on the scale used for ordering null samples: `ln λ` for
    /// likelihood ratios, the raw value otherwise.
    pub fn test_scale(&self) -> f64 {
        self.log_value.unwrap_or(self.value)
    }
}

// Σ (n/2)(ln σ²_num − ln σ²_den); never positive for exact maximizers, so
// positive roundoff is clamped away.
fn log_variance_ratio(summary: &CellSummaryTable, num: &Grid<f64>, den: &Grid<f64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), s_num) in num.indexed() {
        acc += 0.5 * summary.n(i, j) * (s_num.ln() - den[(i, j)].ln());
    }
    acc.min(0.0)
}

/// `ln λ_AB`.
pub fn log_lrt_interaction(summary: &CellSummaryTable, settings: &SolverSettings) -> Result<f64> {
    let full = fit_full(summary)?;
    let null = fit_null_no_interaction(summary, settings)?.require_converged()?;
    Ok(log_variance_ratio(summary, &full.sigma2, &null.sigma2))
}

/// `ln λ_A*`.
pub fn log_lrt_simple_a(summary: &CellSummaryTable, settings: &SolverSettings) -> Result<f64> {
    let full = fit_full(summary)?;
    let null = fit_null_no_simple_a(summary, settings)?.require_converged()?;
    Ok(log_variance_ratio(summary, &full.sigma2, &null.sigma2))
}

/// `ln λ_A`; both numerator and denominator are restricted fits.
pub fn log_lrt_treatment_a(summary: &CellSummaryTable, settings: &SolverSettings) -> Result<f64> {
    let nested = fit_null_no_simple_a(summary, settings)?;
    let additive =
        fit_null_no_interaction_above(summary, settings, &nested)?.require_converged()?;
    let null = nested.require_converged()?;
    Ok(log_variance_ratio(summary, &additive.sigma2, &null.sigma2))
}

pub fn lrt_interaction(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<StatisticValue> {
    Ok(StatisticValue::lrt(
        StatisticKind::LrtInteraction,
        log_lrt_interaction(summary, settings)?,
    ))
}

pub fn lrt_simple_a(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<StatisticValue> {
    Ok(StatisticValue::lrt(
        StatisticKind::LrtSimpleA,
        log_lrt_simple_a(summary, settings)?,
    ))
}

pub fn lrt_treatment_a(
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<StatisticValue> {
    Ok(StatisticValue::lrt(
        StatisticKind::LrtTreatmentA,
        log_lrt_treatment_a(summary, settings)?,
    ))
}

/// Visits every interaction contrast `(i, j1, j2)` with `j1 < j2`, passing
/// its estimate and standard error.
pub fn for_each_interaction_contrast(
    s: &CellSummaryTable,
    mut f: impl FnMut(usize, usize, usize, f64, f64),
) {
    let (a, b) = (s.a(), s.b());
    let af = a as f64;
    let cols = s.col_means();
    let col_se2: Vec<f64> = (0..b).map(|j| (0..a).map(|i| s.se2(i, j)).sum()).collect();
    let own = 1.0 - 2.0 / af;
    for i in 0..a {
        for j1 in 0..b {
            for j2 in j1 + 1..b {
                let est = s.mean(i, j1) - s.mean(i, j2) - cols[j1] + cols[j2];
                let var =
                    own * (s.se2(i, j1) + s.se2(i, j2)) + (col_se2[j1] + col_se2[j2]) / (af * af);
                f(i, j1, j2, est, var.sqrt());
            }
        }
    }
}

/// Visits every simple-effect contrast `(i1, i2, j)` with `i1 < i2`.
pub fn for_each_simple_a_contrast(
    s: &CellSummaryTable,
    mut f: impl FnMut(usize, usize, usize, f64, f64),
) {
    for i1 in 0..s.a() {
        for i2 in i1 + 1..s.a() {
            for j in 0..s.b() {
                let est = s.mean(i1, j) - s.mean(i2, j);
                let se = (s.se2(i1, j) + s.se2(i2, j)).sqrt();
                f(i1, i2, j, est, se);
            }
        }
    }
}

/// Visits every treatment contrast `(i, i')` with `i < i'`. The estimate is
/// `Ȳ_i. − Ȳ_i'.` and the standard error `sqrt(Σ_j S²_ij/n_ij + S²_i'j/n_i'j) / b`.
pub fn for_each_treatment_contrast(
    s: &CellSummaryTable,
    mut f: impl FnMut(usize, usize, f64, f64),
) {
    let rows = s.row_means();
    let row_se2: Vec<f64> = (0..s.a())
        .map(|i| (0..s.b()).map(|j| s.se2(i, j)).sum())
        .collect();
    let b = s.b() as f64;
    for i in 0..s.a() {
        for k in i + 1..s.a() {
            f(
                i,
                k,
                rows[i] - rows[k],
                (row_se2[i] + row_se2[k]).sqrt() / b,
            );
        }
    }
}

fn contrast(label: String, est: f64, se: f64) -> Contrast {
    Contrast {
        label,
        estimate: est,
        se,
        value: est / se,
    }
}

pub fn mct_interaction(summary: &CellSummaryTable) -> Result<StatisticValue> {
    summary.ensure_nondegenerate()?;
    let mut detail = Vec::new();
    for_each_interaction_contrast(summary, |i, j1, j2, est, se| {
        detail.push(contrast(
            format!("g{}{}-g{}{}", i + 1, j1 + 1, i + 1, j2 + 1),
            est,
            se,
        ))
    });
    Ok(StatisticValue::mct(StatisticKind::MctInteraction, detail))
}

pub fn mct_simple_a(summary: &CellSummaryTable) -> Result<StatisticValue> {
    summary.ensure_nondegenerate()?;
    let mut detail = Vec::new();
    for_each_simple_a_contrast(summary, |i1, i2, j, est, se| {
        detail.push(contrast(
            format!("nu{}{}-nu{}{}", i1 + 1, j + 1, i2 + 1, j + 1),
            est,
            se,
        ))
    });
    Ok(StatisticValue::mct(StatisticKind::MctSimpleA, detail))
}

pub fn mct_treatment_a(summary: &CellSummaryTable) -> Result<StatisticValue> {
    summary.ensure_nondegenerate()?;
    let mut detail = Vec::new();
    for_each_treatment_contrast(summary, |i, k, est, se| {
        detail.push(contrast(format!("alpha{}-alpha{}", i + 1, k + 1), est, se))
    });
    Ok(StatisticValue::mct(StatisticKind::MctTreatmentA, detail))
}

fn max_abs_ratio(visit: impl FnOnce(&mut dyn FnMut(f64, f64))) -> f64 {
    let mut best: f64 = 0.0;
    visit(&mut |est, se| best = best.max((est / se).abs()));
    best
}

/// Homoscedastic two-way ANOVA F statistic for the A main effect, using
/// unweighted cell means (Type III sums of squares) and the pooled
/// within-cell variance. Degrees of freedom are `(a-1, N-ab)`.
pub fn classical_f_a(summary: &CellSummaryTable) -> Result<StatisticValue> {
    summary.ensure_nondegenerate()?;
    let (a, b) = (summary.a(), summary.b());
    let bf = b as f64;
    // Contrasts: row mean i minus row mean a, for i < a.
    let l = DMatrix::from_fn(a - 1, a * b, |r, c| {
        let (i, _) = (c / b, c % b);
        if i == r {
            1.0 / bf
        } else if i == a - 1 {
            -1.0 / bf
        } else {
            0.0
        }
    });
    let cell_mean = DVector::from_fn(a * b, |c, _| summary.mean(c / b, c % b));
    let cell_inv_n = DVector::from_fn(a * b, |c, _| 1.0 / summary.n(c / b, c % b));
    let est = &l * cell_mean;
    let cov = &l * DMatrix::from_diagonal(&cell_inv_n) * l.transpose();
    let solved = cov
        .cholesky()
        .ok_or(AnovaError::SingularSystem)?
        .solve(&est);
    let ss_a = est.dot(&solved);

    let total_n = summary.layout().total() as f64;
    let sse: f64 = (0..a)
        .flat_map(|i| (0..b).map(move |j| (i, j)))
        .map(|(i, j)| (summary.n(i, j) - 1.0) * summary.var(i, j))
        .sum();
    let mse = sse / (total_n - (a * b) as f64);
    Ok(StatisticValue {
        kind: StatisticKind::ClassicalFA,
        value: ss_a / (a - 1) as f64 / mse,
        log_value: None,
        detail: None,
    })
}

/// Computes any statistic with full detail.
pub fn compute(
    kind: StatisticKind,
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<StatisticValue> {
    match kind {
        StatisticKind::LrtInteraction => lrt_interaction(summary, settings),
        StatisticKind::LrtSimpleA => lrt_simple_a(summary, settings),
        StatisticKind::LrtTreatmentA => lrt_treatment_a(summary, settings),
        StatisticKind::MctInteraction => mct_interaction(summary),
        StatisticKind::MctSimpleA => mct_simple_a(summary),
        StatisticKind::MctTreatmentA => mct_treatment_a(summary),
        StatisticKind::ClassicalFA => classical_f_a(summary),
    }
}

/// The statistic on its test scale (`ln λ` or the max), without building
/// contrast detail. Used on bootstrap hot paths.
pub fn compute_test_scale(
    kind: StatisticKind,
    summary: &CellSummaryTable,
    settings: &SolverSettings,
) -> Result<f64> {
    match kind {
        StatisticKind::LrtInteraction => log_lrt_interaction(summary, settings),
        StatisticKind::LrtSimpleA => log_lrt_simple_a(summary, settings),
        StatisticKind::LrtTreatmentA => log_lrt_treatment_a(summary, settings),
        StatisticKind::MctInteraction => {
            summary.ensure_nondegenerate()?;
            Ok(max_abs_ratio(|f| {
                for_each_interaction_contrast(summary, |_, _, _, e, s| f(e, s))
            }))
        }
        StatisticKind::MctSimpleA => {
            summary.ensure_nondegenerate()?;
            Ok(max_abs_ratio(|f| {
                for_each_simple_a_contrast(summary, |_, _, _, e, s| f(e, s))
            }))
        }
        StatisticKind::MctTreatmentA => {
            summary.ensure_nondegenerate()?;
            Ok(max_abs_ratio(|f| {
                for_each_treatment_contrast(summary, |_, _, e, s| f(e, s))
            }))
        }
        StatisticKind::ClassicalFA => Ok(classical_f_a(summary)?.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(means: Vec<Vec<f64>>, n: Vec<Vec<usize>>, var: Vec<Vec<f64>>) -> CellSummaryTable {
        CellSummaryTable::from_matrices(
            Grid::from_rows(means).unwrap(),
            Grid::from_rows(n).unwrap(),
            Grid::from_rows(var).unwrap(),
        )
        .unwrap()
    }

    fn hetero(means: Vec<Vec<f64>>) -> CellSummaryTable {
        let (a, b) = (means.len(), means[0].len());
        let n = (0..a)
            .map(|i| (0..b).map(|j| 4 + i + 2 * j).collect())
            .collect();
        let var = (0..a)
            .map(|i| {
                (0..b)
                    .map(|j| 0.5 + 0.3 * i as f64 + 0.7 * j as f64)
                    .collect()
            })
            .collect();
        table(means, n, var)
    }

    #[test]
    fn additive_means_give_unit_lambda_ab() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0], vec![2.0, 4.0, 1.0]]);
        let st = lrt_interaction(&s, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(st.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn column_constant_means_give_unit_lambda_simple_a() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0]; 3]);
        let st = lrt_simple_a(&s, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(st.value, 1.0, epsilon = 1e-12);
        assert_eq!(mct_simple_a(&s).unwrap().value, 0.0);
    }

    #[test]
    fn row_constant_means_give_unit_lambda_a_and_zero_t() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0], vec![1.0, 3.0, 0.0]]);
        let st = lrt_treatment_a(&s, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(st.value, 1.0, epsilon = 1e-8);
        assert_eq!(mct_treatment_a(&s).unwrap().value, 0.0);
    }

    #[test]
    fn lrt_values_lie_in_unit_interval() {
        let s = hetero(vec![
            vec![1.0, -3.0, 0.4],
            vec![2.5, 4.0, -1.0],
            vec![0.0, 0.2, 5.0],
        ]);
        for kind in [
            StatisticKind::LrtInteraction,
            StatisticKind::LrtSimpleA,
            StatisticKind::LrtTreatmentA,
        ] {
            let v = compute(kind, &s, &SolverSettings::default()).unwrap();
            assert!(v.value > 0.0 && v.value <= 1.0, "{kind:?}: {}", v.value);
            assert!(v.deviance().unwrap() >= 0.0);
        }
    }

    #[test]
    fn constant_grid_q_is_zero() {
        let s = hetero(vec![vec![2.0; 3]; 2]);
        assert_eq!(mct_interaction(&s).unwrap().value, 0.0);
    }

    #[test]
    fn q_with_two_rows_uses_only_pooled_term() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0], vec![2.0, -4.0, 1.0]]);
        let q = mct_interaction(&s).unwrap();
        let d = &q.detail.as_ref().unwrap()[0];
        // i = 1, j1 = 1, j2 = 2
        let cols = s.col_means();
        let est = s.mean(0, 0) - s.mean(0, 1) - cols[0] + cols[1];
        let var = (s.se2(0, 0) + s.se2(1, 0) + s.se2(0, 1) + s.se2(1, 1)) / 4.0;
        assert_abs_diff_eq!(d.value, est / var.sqrt(), epsilon = 1e-14);
        assert_eq!(q.detail.unwrap().len(), 2 * 3);
    }

    #[test]
    fn simple_a_component_by_hand() {
        // difference 2, S²/n terms 2 + 2 = 4 -> component 1
        let s = table(
            vec![vec![3.0, 0.0], vec![1.0, 0.0]],
            vec![vec![5, 5], vec![5, 5]],
            vec![vec![10.0, 1.0], vec![10.0, 1.0]],
        );
        let r = mct_simple_a(&s).unwrap();
        assert_abs_diff_eq!(r.detail.as_ref().unwrap()[0].value, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn t_with_two_rows_is_single_standardized_difference() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0], vec![2.0, 4.5, 1.0]]);
        let t = mct_treatment_a(&s).unwrap();
        let rows = s.row_means();
        let denom: f64 = (0..3).map(|j| s.se2(0, j) + s.se2(1, j)).sum();
        let expect = 3.0 * (rows[0] - rows[1]) / denom.sqrt();
        assert_abs_diff_eq!(t.value, expect.abs(), epsilon = 1e-14);
        assert_eq!(t.detail.unwrap().len(), 1);
    }

    #[test]
    fn mct_value_is_max_abs_detail() {
        let s = hetero(vec![
            vec![1.0, -3.0, 0.4],
            vec![2.5, 4.0, -1.0],
            vec![0.0, 0.2, 5.0],
        ]);
        for st in [mct_interaction(&s), mct_simple_a(&s), mct_treatment_a(&s)] {
            let st = st.unwrap();
            let m = st
                .detail
                .unwrap()
                .iter()
                .map(|c| c.value.abs())
                .fold(0.0, f64::max);
            assert_eq!(st.value, m);
        }
    }

    #[test]
    fn fast_path_matches_detailed_path() {
        let s = hetero(vec![
            vec![1.0, -3.0, 0.4],
            vec![2.5, 4.0, -1.0],
            vec![0.0, 0.2, 5.0],
        ]);
        let st = SolverSettings::default();
        for kind in StatisticKind::PROPOSED {
            let full = compute(kind, &s, &st).unwrap();
            let fast = compute_test_scale(kind, &s, &st).unwrap();
            assert_eq!(full.test_scale(), fast, "{kind:?}");
        }
    }

    #[test]
    fn classical_f_row_constant_is_zero() {
        let s = hetero(vec![vec![1.0, 3.0, 0.0], vec![1.0, 3.0, 0.0]]);
        assert_abs_diff_eq!(classical_f_a(&s).unwrap().value, 0.0, epsilon = 1e-20);
    }

    #[test]
    fn classical_f_balanced_matches_textbook_formula() {
        let s = table(
            vec![
                vec![1.0, 3.0, 0.0],
                vec![2.0, 4.5, 1.0],
                vec![0.0, 1.0, -1.0],
            ],
            vec![vec![6; 3]; 3],
            vec![
                vec![1.0, 2.0, 1.5],
                vec![0.5, 1.0, 3.0],
                vec![2.0, 2.0, 1.0],
            ],
        );
        let rows = s.row_means();
        let g = s.grand_mean();
        let ss_a = 6.0 * 3.0 * rows.iter().map(|r| (r - g).powi(2)).sum::<f64>();
        let mse = s.vars().iter().sum::<f64>() / 9.0;
        let f = classical_f_a(&s).unwrap();
        assert_abs_diff_eq!(f.value, ss_a / 2.0 / mse, epsilon = 1e-10);
    }
}
