//! Property checks shared by the proptest suites and the acceptance runner.
//! Each returns `Err(description)` on the first violation.

use hetanova::asymptotic::AsymptoticCovariance;
use hetanova::bootstrap::{bootstrap_null_samples, with_threads, BootstrapSettings};
use hetanova::data::CellSummaryTable;
use hetanova::grid::Grid;
use hetanova::inference::{run_test, TestMethod, TestRequest, TestTarget};
use hetanova::mle::{
    fit_null_no_interaction, fit_null_no_simple_a, stationarity_residuals, NoInteractionIteration,
    NoSimpleAIteration, SolverSettings,
};
use hetanova::stats::{compute, StatisticKind};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ks_distance, newton_oracle, sigma_z_blocks, Additive, ColumnsOnly};

pub type Check = std::result::Result<(), String>;

const SWEEPS: usize = 3000;

/// Log-likelihood never drops by more than 1e-10 across sweeps of either
/// fixed-point solver.
pub fn loglik_monotone(s: &CellSummaryTable) -> Check {
    let settings = SolverSettings::default();
    let mut it = NoInteractionIteration::new(s).map_err(|e| e.to_string())?;
    let mut prev = f64::NEG_INFINITY;
    for m in 0..SWEEPS {
        let (da, dz) = it.sweep().map_err(|e| e.to_string())?;
        let l = it.loglik();
        if l < prev - 1e-10 {
            return Err(format!("no-interaction sweep {m}: {prev} -> {l}"));
        }
        let sum: f64 = it.alpha.iter().sum();
        if sum.abs() > 1e-9 * (1.0 + it.alpha.iter().map(|x| x.abs()).sum::<f64>()) {
            return Err(format!("alpha sum {sum} after sweep {m}"));
        }
        prev = l;
        if da <= settings.epsilon && dz <= settings.epsilon {
            break;
        }
    }
    let mut it = NoSimpleAIteration::new(s).map_err(|e| e.to_string())?;
    let mut prev = f64::NEG_INFINITY;
    for m in 0..SWEEPS {
        let dz = it.sweep();
        let l = it.loglik();
        if l < prev - 1e-10 {
            return Err(format!("no-simple-A sweep {m}: {prev} -> {l}"));
        }
        prev = l;
        if dz <= settings.epsilon {
            break;
        }
    }
    Ok(())
}

/// Residuals of the likelihood equations at convergence are within 10ε.
pub fn stationarity(s: &CellSummaryTable) -> Check {
    let settings = SolverSettings::default();
    let tol = 10.0 * settings.epsilon;
    for fit in [
        fit_null_no_interaction(s, &settings),
        fit_null_no_simple_a(s, &settings),
    ] {
        let fit = fit.map_err(|e| e.to_string())?;
        if !fit.converged {
            return Err(format!("{:?} did not converge", fit.space));
        }
        let r = stationarity_residuals(s, &fit).map_err(|e| e.to_string())?;
        // σ² residuals are relative to the variance scale.
        let scale = fit.sigma2.iter().fold(1.0f64, |m, v| m.max(*v));
        if r.alpha > tol || r.zeta > tol || r.sigma2 > tol * scale {
            return Err(format!("{:?}: residuals {r:?}", fit.space));
        }
    }
    Ok(())
}

/// Fixed-point fits agree with the multi-start Newton maximizer of the
/// profile likelihood. The no-simple-A fit is only compared when `near_null`
/// (data without factor-A effects).
pub fn oracle_agreement(s: &CellSummaryTable, near_null: bool, tol: f64) -> Check {
    let settings = SolverSettings::default();
    let (a, b) = (s.a(), s.b());
    let fit = fit_null_no_interaction(s, &settings).map_err(|e| e.to_string())?;
    let oracle = newton_oracle(s, &Additive { a, b });
    compare_fit("no-interaction", s, &fit, &oracle, tol)?;
    if near_null {
        let fit = fit_null_no_simple_a(s, &settings).map_err(|e| e.to_string())?;
        let oracle = newton_oracle(s, &ColumnsOnly { b });
        compare_fit("no-simple-A", s, &fit, &oracle, tol)?;
    }
    Ok(())
}

fn compare_fit(
    name: &str,
    s: &CellSummaryTable,
    fit: &hetanova::mle::FittedModel,
    oracle: &super::OracleFit,
    tol: f64,
) -> Check {
    if oracle.grad_norm > 1e-7 {
        return Err(format!(
            "{name}: oracle did not converge ({})",
            oracle.grad_norm
        ));
    }
    for i in 0..s.a() {
        for j in 0..s.b() {
            let dm = (fit.fitted_mean(i, j) - oracle.means[(i, j)]).abs();
            let ds =
                (fit.sigma2[(i, j)] - oracle.sigma2[(i, j)]).abs() / oracle.sigma2[(i, j)].max(1.0);
            if dm > tol || ds > tol {
                return Err(format!(
                    "{name} cell ({i},{j}): mean diff {dm:e}, sigma2 diff {ds:e}"
                ));
            }
        }
    }
    Ok(())
}

/// `A diag(η²) Aᵀ` equals the partitioned block form.
pub fn block_equivalence(eta2: &[f64]) -> Check {
    let cov = AsymptoticCovariance::from_eta2(eta2.to_vec()).map_err(|e| e.to_string())?;
    let blocks = sigma_z_blocks(eta2);
    let scale = eta2.iter().fold(0.0f64, |m, v| m.max(*v));
    let diff = (&cov.sigma_z - &blocks).amax();
    if !(diff <= 1e-12 * scale) {
        return Err(format!("a = {}: max difference {diff:e}", eta2.len()));
    }
    Ok(())
}

/// Σ_z and Σ_T symmetric, Σ_T unit-diagonal, both PSD.
pub fn covariance_shape(eta2: &[f64]) -> Check {
    let cov = AsymptoticCovariance::from_eta2(eta2.to_vec()).map_err(|e| e.to_string())?;
    for (name, m) in [("sigma_z", &cov.sigma_z), ("sigma_t", &cov.sigma_t)] {
        let asym = (m - m.transpose()).amax();
        if asym > 1e-14 * m.amax() {
            return Err(format!("{name} asymmetric by {asym:e}"));
        }
        let min = m.clone().symmetric_eigenvalues().min();
        if min < -1e-12 * m.amax() {
            return Err(format!("{name} has eigenvalue {min:e}"));
        }
    }
    for k in 0..cov.q() {
        if cov.sigma_t[(k, k)] != 1.0 {
            return Err(format!("sigma_t diagonal {k} = {}", cov.sigma_t[(k, k)]));
        }
    }
    Ok(())
}

/// The six proposed statistics are unchanged by `y → c·y + d`, and the
/// interaction statistics by adding `a_i + c_j` to the means.
pub fn invariance(s: &CellSummaryTable, c: f64, d: f64, row: &[f64], col: &[f64]) -> Check {
    let settings = SolverSettings::default();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0);
    let shifted = s
        .with_means(Grid::from_fn(s.a(), s.b(), |i, j| {
            s.mean(i, j) + row[i] + col[j]
        }))
        .map_err(|e| e.to_string())?;
    let scaled = s.affine(c, d);
    for kind in StatisticKind::PROPOSED {
        let base = compute(kind, s, &settings).map_err(|e| e.to_string())?;
        let other = compute(kind, &scaled, &settings).map_err(|e| e.to_string())?;
        if !close(base.test_scale(), other.test_scale()) {
            return Err(format!(
                "{kind:?} under y -> {c}y + {d}: {} vs {}",
                base.test_scale(),
                other.test_scale()
            ));
        }
        if matches!(
            kind,
            StatisticKind::LrtInteraction | StatisticKind::MctInteraction
        ) {
            let other = compute(kind, &shifted, &settings).map_err(|e| e.to_string())?;
            if !close(base.test_scale(), other.test_scale()) {
                return Err(format!(
                    "{kind:?} under additive shift: {} vs {}",
                    base.test_scale(),
                    other.test_scale()
                ));
            }
        }
    }
    Ok(())
}

/// Identical JSON reports from a one-thread pool and a multi-thread pool.
pub fn thread_determinism(s: &CellSummaryTable, seed: u64, threads: usize) -> Check {
    for (target, method) in [
        (TestTarget::Interaction, TestMethod::LrtBoot),
        (TestTarget::TreatmentA, TestMethod::MctBoot),
        (TestTarget::TreatmentB, TestMethod::LrtBoot),
        (TestTarget::TreatmentA, TestMethod::MctAsymptotic),
    ] {
        let req = TestRequest::new(target, method)
            .with_seed(seed)
            .with_replicates(400);
        let run = |n| {
            with_threads(Some(n), || {
                run_test(s, &req).and_then(|r| Ok((r.to_json()?, r.null_sample)))
            })
        };
        let one = run(1).map_err(|e| e.to_string())?;
        let many = run(threads).map_err(|e| e.to_string())?;
        if one != many {
            return Err(format!(
                "{target:?}/{method:?} differs between 1 and {threads} threads"
            ));
        }
    }
    Ok(())
}

/// KS distances between bootstrap null samples and a direct simulation of
/// the statistic under the true null, for `a × b` cells of size `n`.
pub struct KsReport {
    pub kind: StatisticKind,
    pub boot_vs_direct: f64,
    pub boot_vs_boot: f64,
}

pub fn ks_closeness(
    rng: &mut impl Rng,
    sigma2: &Grid<f64>,
    n: usize,
    h: usize,
    direct: usize,
    seed: u64,
) -> Result<Vec<KsReport>, String> {
    let (a, b) = sigma2.shape();
    let kinds = [StatisticKind::LrtTreatmentA, StatisticKind::MctTreatmentA];
    let solver = SolverSettings::default();
    let draw = |rng: &mut dyn rand::RngCore| -> CellSummaryTable {
        // Raw null data, summarized by hand.
        let mut mean = Grid::filled(a, b, 0.0);
        let mut var = Grid::filled(a, b, 0.0);
        for i in 0..a {
            for j in 0..b {
                let dist = Normal::new(0.0, sigma2[(i, j)].sqrt()).unwrap();
                let ys: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
                let m = ys.iter().sum::<f64>() / n as f64;
                mean[(i, j)] = m;
                var[(i, j)] = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1) as f64;
            }
        }
        CellSummaryTable::from_matrices(mean, Grid::filled(a, b, n), var).unwrap()
    };
    let observed = draw(rng);
    let mut direct_values = vec![Vec::with_capacity(direct); kinds.len()];
    for _ in 0..direct {
        let s = draw(rng);
        for (k, kind) in kinds.iter().enumerate() {
            let v = compute(*kind, &s, &solver).map_err(|e| e.to_string())?;
            direct_values[k].push(v.test_scale());
        }
    }
    let boot = |seed| {
        bootstrap_null_samples(
            &observed,
            &kinds,
            &BootstrapSettings::new(h, 0.05, seed),
            &solver,
        )
        .map_err(|e| e.to_string())
    };
    let first = boot(seed)?;
    let second = boot(seed ^ 0x9e37_79b9)?;
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| KsReport {
            kind,
            boot_vs_direct: ks_distance(first[k].test_scale_values(), &direct_values[k]),
            boot_vs_boot: ks_distance(first[k].test_scale_values(), second[k].test_scale_values()),
        })
        .collect())
}
