//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

pub mod props;

use hetanova::data::CellSummaryTable;
use hetanova::grid::Grid;
use hetanova::io::read_summary_json_path;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn table7() -> CellSummaryTable {
    read_summary_json_path(&data_path("table7.json")).expect("table7.json")
}

/// Arbitrary valid summary with `a × b` cells; cell means may sit far from
/// any additive structure relative to their standard errors.
pub fn random_summary(rng: &mut impl Rng, a: usize, b: usize) -> CellSummaryTable {
    let mean = Grid::from_fn(a, b, |_, _| rng.random_range(-3.0..3.0));
    let n = Grid::from_fn(a, b, |_, _| rng.random_range(3..30usize));
    let var = Grid::from_fn(a, b, |_, _| rng.random_range(0.2..5.0));
    CellSummaryTable::from_matrices(mean, n, var).unwrap()
}

/// Summary shaped like data from the model: additive means plus
/// interaction of up to a few standard errors, heterogeneous variances, and
/// sample variances within a factor of two of the truth.
/// With `row_effects = false` the additive part has no factor-A effects.
pub fn model_summary(
    rng: &mut impl Rng,
    a: usize,
    b: usize,
    row_effects: bool,
) -> CellSummaryTable {
    let spread = if row_effects { 2.0 } else { 0.0 };
    let alpha: Vec<f64> = (0..a).map(|_| rng.random_range(-spread..=spread)).collect();
    let beta: Vec<f64> = (0..b).map(|_| rng.random_range(-2.0..2.0)).collect();
    let strength = rng.random_range(0.0..4.0);
    let n = Grid::from_fn(a, b, |_, _| rng.random_range(5..60usize));
    let sigma2 = Grid::from_fn(a, b, |_, _| rng.random_range(0.3..6.0));
    let mean = Grid::from_fn(a, b, |i, j| {
        let se = (sigma2[(i, j)] / n[(i, j)] as f64).sqrt();
        alpha[i] + beta[j] + strength * se * rng.random_range(-1.0..1.0)
    });
    let var = Grid::from_fn(a, b, |i, j| sigma2[(i, j)] * rng.random_range(0.5..2.0));
    CellSummaryTable::from_matrices(mean, n, var).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean structure of a restricted model as a design: `μ_ij = x_ijᵀ θ`.
pub trait Design {
    fn dim(&self) -> usize;
    fn row(&self, i: usize, j: usize) -> DVector<f64>;
    fn start(&self, s: &CellSummaryTable) -> DVector<f64>;
}

/// `μ_ij = α_i + ζ_j` with `α_a = −Σ_{i<a} α_i`; `θ = (α_1..α_{a−1}, ζ_1..ζ_b)`.
pub struct Additive {
    pub a: usize,
    pub b: usize,
}

impl Design for Additive {
    fn dim(&self) -> usize {
        self.a - 1 + self.b
    }

    fn row(&self, i: usize, j: usize) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        if i + 1 < self.a {
            x[i] = 1.0;
        } else {
            for k in 0..self.a - 1 {
                x[k] = -1.0;
            }
        }
        x[self.a - 1 + j] = 1.0;
        x
    }

    fn start(&self, s: &CellSummaryTable) -> DVector<f64> {
        let rows = s.row_means();
        let cols = s.col_means();
        let grand = s.grand_mean();
        let mut t = DVector::zeros(self.dim());
        for i in 0..self.a - 1 {
            t[i] = rows[i] - grand;
        }
        for j in 0..self.b {
            t[self.a - 1 + j] = cols[j];
        }
        t
    }
}

/// `μ_ij = ζ_j`.
pub struct ColumnsOnly {
    pub b: usize,
}

impl Design for ColumnsOnly {
    fn dim(&self) -> usize {
        self.b
    }

    fn row(&self, _i: usize, j: usize) -> DVector<f64> {
        let mut x = DVector::zeros(self.b);
        x[j] = 1.0;
        x
    }

    fn start(&self, s: &CellSummaryTable) -> DVector<f64> {
        DVector::from_vec(s.col_means())
    }
}

/// Profile log-likelihood `−Σ (n/2) ln σ²_ij(θ)` (constants dropped), where
/// `σ²_ij(θ) = ml_var_ij + (Ȳ_ij − μ_ij)²`.
pub fn profile_loglik(s: &CellSummaryTable, d: &impl Design, theta: &DVector<f64>) -> f64 {
    let mut l = 0.0;
    for i in 0..s.a() {
        for j in 0..s.b() {
            let r = s.mean(i, j) - d.row(i, j).dot(theta);
            l -= 0.5 * s.n(i, j) * (s.ml_var(i, j) + r * r).ln();
        }
    }
    l
}

pub struct OracleFit {
    pub theta: DVector<f64>,
    pub sigma2: Grid<f64>,
    pub means: Grid<f64>,
    pub grad_norm: f64,
}

/// Damped Newton ascent on the profile likelihood with analytic gradient
/// `Σ n r/d x` and Hessian `Σ n (2r² − d)/d² x xᵀ`, restarted from the
/// design's natural start and a set of scattered starts; the best stationary
/// point wins.
pub fn newton_oracle(s: &CellSummaryTable, d: &impl Design) -> OracleFit {
    let base = d.start(s);
    let spread = s.means().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let mut r = rng(0x0dac1e);
    let mut best = newton_from(s, d, base.clone());
    for _ in 0..16 {
        let start = base.map(|t| t + r.random_range(-spread..spread));
        let cand = newton_from(s, d, start);
        if cand.grad_norm < 1e-7
            && profile_loglik(s, d, &cand.theta) > profile_loglik(s, d, &best.theta) + 1e-12
        {
            best = cand;
        }
    }
    best
}

fn newton_from(s: &CellSummaryTable, d: &impl Design, mut theta: DVector<f64>) -> OracleFit {
    let p = d.dim();
    let mut grad_norm = f64::INFINITY;
    for _ in 0..500 {
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for i in 0..s.a() {
            for j in 0..s.b() {
                let x = d.row(i, j);
                let r = s.mean(i, j) - x.dot(&theta);
                let dv = s.ml_var(i, j) + r * r;
                let n = s.n(i, j);
                g += &x * (n * r / dv);
                h += &x * x.transpose() * (n * (2.0 * r * r - dv) / (dv * dv));
            }
        }
        grad_norm = g.amax();
        if grad_norm < 1e-11 {
            break;
        }
        // Levenberg shift until the step is an ascent step of a
        // negative-definite model.
        let mut lambda = 0.0;
        let base = profile_loglik(s, d, &theta);
        loop {
            let m = -(&h) + DMatrix::identity(p, p) * lambda;
            if let Some(ch) = m.clone().cholesky() {
                let step = ch.solve(&g);
                let cand = &theta + &step;
                if profile_loglik(s, d, &cand) >= base - 1e-14 * base.abs() {
                    theta = cand;
                    break;
                }
            }
            lambda = if lambda == 0.0 {
                1e-6 * (1.0 + h.amax())
            } else {
                lambda * 10.0
            };
            if lambda > 1e12 {
                break;
            }
        }
    }
    let means = Grid::from_fn(s.a(), s.b(), |i, j| d.row(i, j).dot(&theta));
    let sigma2 = Grid::from_fn(s.a(), s.b(), |i, j| {
        let r = s.mean(i, j) - means[(i, j)];
        s.ml_var(i, j) + r * r
    });
    OracleFit {
        theta,
        sigma2,
        means,
        grad_norm,
    }
}

/// Pair list `(1,2), (1,3), …, (a−1,a)` in 1-based levels.
fn pairs(a: usize) -> Vec<(usize, usize)> {
    (1..=a)
        .flat_map(|i| (i + 1..=a).map(move |k| (i, k)))
        .collect()
}

/// `Σ_z` assembled block by block from the published partitioned layout:
/// diagonal blocks `diag(η²_{l+1..a}) + 11ᵀ η²_l`, above-diagonal blocks from
/// `M^1` (zeros, a row of `−η²_{l'}`, then a diagonal) with leading rows
/// deleted, and transposes below.
pub fn sigma_z_blocks(eta2: &[f64]) -> DMatrix<f64> {
    let a = eta2.len();
    let eta = |k: usize| eta2[k - 1];
    let q = a * (a - 1) / 2;
    let offset = |l: usize| (1..l).map(|m| a - m).sum::<usize>();
    let mut out = DMatrix::from_element(q, q, f64::NAN);

    let m1 = |lp: usize| -> DMatrix<f64> {
        // order (a−1) × (a−l')
        let mut m = DMatrix::zeros(a - 1, a - lp);
        for c in 0..a - lp {
            m[(lp - 2, c)] = -eta(lp);
        }
        for c in 0..a - lp {
            m[(lp - 1 + c, c)] = eta(lp + 1 + c);
        }
        m
    };

    for l in 1..a {
        let size = a - l;
        let o = offset(l);
        for r in 0..size {
            for c in 0..size {
                out[(o + r, o + c)] = eta(l) + if r == c { eta(l + 1 + r) } else { 0.0 };
            }
        }
        for lp in l + 1..a {
            let full = m1(lp);
            let block = full.rows(l - 1, a - l).into_owned();
            let oc = offset(lp);
            for r in 0..block.nrows() {
                for c in 0..block.ncols() {
                    out[(o + r, oc + c)] = block[(r, c)];
                    out[(oc + c, o + r)] = block[(r, c)];
                }
            }
        }
    }
    let _ = pairs(a);
    out
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Standard normal CDF via the complementary error function.
pub fn phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Root of a monotone increasing function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
