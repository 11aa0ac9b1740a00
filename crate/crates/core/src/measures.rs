//! Exact samplers for the Gaussian laws attached to the dynamics and the
//! penalization potential.
//!
//! In path form: `mu` is the law of `B - mean(B) - a` with `a ~ N(0,1)`
//! independent of the Brownian motion `B`; `mu_c` is the same with the mean
//! pinned to the constant `c`; `nu_c` conditions `mu_c` on nonnegativity,
//! and `nu_c_eps` tilts `mu_c` by `exp(-U_eps)`. Conditioning and tilting
//! are implemented by rejection, which is cheap for the average levels used
//! here.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spectral::{to_coeffs, trapezoid, Field, GridSpec};

/// A stochastic-process trajectory on the uniform grid of `[0, 1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m_points() {
            return Err(CoreError::SizeMismatch {
                left: values.len(),
                right: grid.m_points(),
                context: "path values vs grid",
            });
        }
        Ok(Self { grid, values })
    }

    /// Trapezoid average over `[0, 1]`.
    pub fn average(&self) -> f64 {
        trapezoid(&self.values, &self.grid)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn value_at(&self, theta: f64) -> f64 {
        self.values[self.grid.nearest_index(theta)]
    }

    pub fn to_field(&self, n_modes: usize) -> Result<Field> {
        to_coeffs(&self.values, &self.grid, n_modes)
    }
}

/// The penalization profile `f`: nonincreasing, Lipschitz, zero on
/// `[0, inf)`, positive on the negatives, with antiderivative `F' = -f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenalizationKind {
    /// `f(u) = (u)^- = -(u ^ 0)`, `F(u) = ((u)^-)^2 / 2`.
    NegativePart,
    /// Smooth variant `f(u) = u^2 / (delta + |u|)` for `u < 0`, used for
    /// robustness checks only.
    SmoothNegativePart { delta: f64 },
}

impl PenalizationKind {
    pub fn f(&self, u: f64) -> f64 {
        match *self {
            PenalizationKind::NegativePart => (-u).max(0.0),
            PenalizationKind::SmoothNegativePart { delta } => {
                if u < 0.0 {
                    u * u / (delta + u.abs())
                } else {
                    0.0
                }
            }
        }
    }

    pub fn big_f(&self, u: f64) -> f64 {
        match *self {
            PenalizationKind::NegativePart => {
                let m = (-u).max(0.0);
                0.5 * m * m
            }
            PenalizationKind::SmoothNegativePart { delta } => {
                if u < 0.0 {
                    let t = -u;
                    0.5 * t * t - delta * t + delta * delta * (1.0 + t / delta).ln()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PenalizationParams {
    pub eps: f64,
    pub kind: PenalizationKind,
}

impl PenalizationParams {
    pub fn new(eps: f64) -> Result<Self> {
        Self::with_kind(eps, PenalizationKind::NegativePart)
    }

    pub fn with_kind(eps: f64, kind: PenalizationKind) -> Result<Self> {
        crate::error::require_positive("eps", eps)?;
        Ok(Self { eps, kind })
    }
}

/// Outcome counters of a rejection sampler.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct RejectionReport {
    pub proposals: u64,
    pub accepted: u64,
}

impl RejectionReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

pub const DEFAULT_REJECTION_BUDGET: u64 = 10_000_000;

pub(crate) fn brownian_into(grid: &GridSpec, rng: &mut impl Rng, out: &mut Vec<f64>) {
    let h_sqrt = grid.spacing().sqrt();
    out.clear();
    out.reserve(grid.m_points());
    let mut acc = 0.0;
    out.push(0.0);
    for _ in 1..grid.m_points() {
        let xi: f64 = rng.sample(StandardNormal);
        acc += h_sqrt * xi;
        out.push(acc);
    }
}

/// Standard Brownian motion on the grid: independent `N(0, h)` increments,
/// `B_0 = 0`.
pub fn sample_brownian(grid: &GridSpec, rng: &mut impl Rng) -> PathSample {
    let mut values = Vec::new();
    brownian_into(grid, rng, &mut values);
    PathSample {
        grid: *grid,
        values,
    }
}

pub(crate) fn mu_into(grid: &GridSpec, rng: &mut impl Rng, out: &mut Vec<f64>) {
    brownian_into(grid, rng, out);
    let avg = trapezoid(out, grid);
    let a: f64 = rng.sample(StandardNormal);
    for v in out.iter_mut() {
        *v -= avg + a;
    }
}

/// The centered law `mu`: `Y = B - mean(B) - a`, `a ~ N(0,1)` independent.
pub fn sample_mu(grid: &GridSpec, rng: &mut impl Rng) -> PathSample {
    let mut values = Vec::new();
    mu_into(grid, rng, &mut values);
    PathSample {
        grid: *grid,
        values,
    }
}

pub(crate) fn mu_c_into(c: f64, grid: &GridSpec, rng: &mut impl Rng, out: &mut Vec<f64>) {
    brownian_into(grid, rng, out);
    let avg = trapezoid(out, grid);
    for v in out.iter_mut() {
        *v += c - avg;
    }
}

/// The fixed-average law `mu_c`: `Y^c = B - mean(B) + c`.
pub fn sample_mu_c(c: f64, grid: &GridSpec, rng: &mut impl Rng) -> PathSample {
    let mut values = Vec::new();
    mu_c_into(c, grid, rng, &mut values);
    PathSample {
        grid: *grid,
        values,
    }
}

/// Penalization potential `U_eps(x) = (1/eps) int F(x)`, by trapezoid on the
/// sample's grid. Zero exactly when the path is nonnegative on the grid.
pub fn u_eps(values: &[f64], grid: &GridSpec, params: &PenalizationParams) -> f64 {
    let h = grid.spacing();
    let mut acc = 0.0;
    let last = values.len() - 1;
    for (i, &v) in values.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 * h } else { h };
        acc += w * params.kind.big_f(v);
    }
    acc / params.eps
}

/// `mu_c` conditioned on nonnegativity at the grid points, by rejection.
pub fn sample_nu_c(
    c: f64,
    grid: &GridSpec,
    rng: &mut impl Rng,
    max_proposals: u64,
) -> Result<(PathSample, RejectionReport)> {
    crate::error::require_positive("c", c)?;
    let mut report = RejectionReport::default();
    let mut values = Vec::new();
    while report.proposals < max_proposals {
        report.proposals += 1;
        mu_c_into(c, grid, rng, &mut values);
        if values.iter().all(|&v| v >= 0.0) {
            report.accepted = 1;
            return Ok((
                PathSample {
                    grid: *grid,
                    values,
                },
                report,
            ));
        }
    }
    Err(CoreError::RejectionBudget { report })
}

/// The Gibbs tilt `nu_c_eps`: propose from `mu_c`, accept with probability
/// `exp(-U_eps)`.
pub fn sample_nu_c_eps(
    c: f64,
    params: &PenalizationParams,
    grid: &GridSpec,
    rng: &mut impl Rng,
    max_proposals: u64,
) -> Result<(PathSample, RejectionReport)> {
    crate::error::require_positive("c", c)?;
    let mut report = RejectionReport::default();
    let mut values = Vec::new();
    while report.proposals < max_proposals {
        report.proposals += 1;
        mu_c_into(c, grid, rng, &mut values);
        let u = u_eps(&values, grid, params);
        // exp(-u) is in (0, 1]: a valid acceptance probability.
        if rng.random::<f64>() < (-u).exp() {
            report.accepted = 1;
            return Ok((
                PathSample {
                    grid: *grid,
                    values,
                },
                report,
            ));
        }
    }
    Err(CoreError::RejectionBudget { report })
}

/// Convenience batch versions used by the verification drivers.
pub fn sample_nu_c_many(
    c: f64,
    grid: &GridSpec,
    rng: &mut impl Rng,
    n: usize,
    max_proposals: u64,
) -> Result<(Vec<PathSample>, RejectionReport)> {
    let mut total = RejectionReport::default();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, rep) = sample_nu_c(c, grid, rng, max_proposals.saturating_sub(total.proposals))?;
        total.proposals += rep.proposals;
        total.accepted += rep.accepted;
        out.push(p);
    }
    Ok((out, total))
}

pub fn sample_nu_c_eps_many(
    c: f64,
    params: &PenalizationParams,
    grid: &GridSpec,
    rng: &mut impl Rng,
    n: usize,
    max_proposals: u64,
) -> Result<(Vec<PathSample>, RejectionReport)> {
    let mut total = RejectionReport::default();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, rep) = sample_nu_c_eps(
            c,
            params,
            grid,
            rng,
            max_proposals.saturating_sub(total.proposals),
        )?;
        total.proposals += rep.proposals;
        total.accepted += rep.accepted;
        out.push(p);
    }
    Ok((out, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use crate::spectral::kernel_q;
    use crate::stats::{covariance_estimate, RunningStat};

    #[test]
    fn brownian_starts_at_zero_and_has_theta_variance() {
        let grid = GridSpec::new(65).unwrap();
        let mut rng = SeedTree::new(11).stream("bm");
        let n = 60_000;
        let mut at_half = Vec::with_capacity(n);
        let mut at_quarter = Vec::with_capacity(n);
        for _ in 0..n {
            let b = sample_brownian(&grid, &mut rng);
            assert_eq!(b.values[0], 0.0);
            at_half.push(b.value_at(0.5));
            at_quarter.push(b.value_at(0.25));
        }
        let mut v = RunningStat::default();
        for &x in &at_half {
            v.push(x * x);
        }
        // Var(B_1/2) = 1/2 within 3 SE
        assert!((v.mean() - 0.5).abs() < 3.0 * v.stderr(), "{}", v.mean());
        let cov = covariance_estimate(&at_quarter, &at_half);
        assert!((cov.mean - 0.25).abs() < 3.0 * cov.stderr);
    }

    #[test]
    fn mu_variance_at_zero_and_mean_behavior() {
        let grid = GridSpec::new(129).unwrap();
        let mut rng = SeedTree::new(5).stream("mu");
        let n = 60_000;
        let mut v0 = RunningStat::default();
        let mut avg = RunningStat::default();
        let mut avg_sq = RunningStat::default();
        for _ in 0..n {
            let y = sample_mu(&grid, &mut rng);
            v0.push(y.values[0] * y.values[0]);
            let a = y.average();
            avg.push(a);
            avg_sq.push(a * a);
        }
        // Var(Y_0) = q(0,0) + 1 = 4/3
        assert!((v0.mean() - 4.0 / 3.0).abs() < 3.0 * v0.stderr());
        // average of Y is -a: mean 0, variance 1
        assert!(avg.mean().abs() < 3.0 * avg.stderr());
        assert!((avg_sq.mean() - 1.0).abs() < 3.0 * avg_sq.stderr());
    }

    #[test]
    fn mu_cross_covariance_matches_kernel() {
        let grid = GridSpec::new(129).unwrap();
        let mut rng = SeedTree::new(6).stream("mu-cov");
        let n = 60_000;
        let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let y = sample_mu(&grid, &mut rng);
            xs.push(y.value_at(0.25));
            ys.push(y.value_at(0.75));
        }
        let cov = covariance_estimate(&xs, &ys);
        let expect = kernel_q(0.25, 0.75).unwrap() + 1.0;
        assert!(
            (cov.mean - expect).abs() < 3.0 * cov.stderr,
            "{} vs {expect}",
            cov.mean
        );
    }

    #[test]
    fn mu_c_average_is_c_and_covariance_is_q() {
        let grid = GridSpec::new(129).unwrap();
        let mut rng = SeedTree::new(7).stream("muc");
        let n = 60_000;
        let mut v0 = RunningStat::default();
        for _ in 0..n {
            let y = sample_mu_c(0.7, &grid, &mut rng);
            // trapz average is restored exactly up to roundoff
            assert!((y.average() - 0.7).abs() < 1e-12);
            let d = y.values[0] - 0.7;
            v0.push(d * d);
        }
        // c = 0 case of the spec: variance at theta = 0 is q(0,0) = 1/3
        assert!((v0.mean() - 1.0 / 3.0).abs() < 3.0 * v0.stderr());
    }

    #[test]
    fn u_eps_examples() {
        let grid = GridSpec::new(101).unwrap();
        let p1 = PenalizationParams::new(0.5).unwrap();
        let ones = vec![1.0; grid.m_points()];
        assert_eq!(u_eps(&ones, &grid, &p1), 0.0);
        let neg = vec![-1.0; grid.m_points()];
        assert!((u_eps(&neg, &grid, &p1) - 1.0).abs() < 1e-12);
        let p2 = PenalizationParams::new(1.0).unwrap();
        let ramp: Vec<f64> = grid.points().iter().map(|&t| -t).collect();
        assert!((u_eps(&ramp, &grid, &p2) - 1.0 / 6.0).abs() < 1e-4);
    }

    #[test]
    fn nu_c_paths_are_nonnegative_and_rate_beats_floor() {
        let grid = GridSpec::new(129).unwrap();
        let mut rng = SeedTree::new(8).stream("nuc");
        let (paths, rep) = sample_nu_c_many(1.0, &grid, &mut rng, 400, 10_000_000).unwrap();
        for p in &paths {
            assert!(p.min() >= 0.0);
            assert!((p.average() - 1.0).abs() < 1e-12);
        }
        // floor from the inclusion {sup |B| <= c/2} into the acceptance event
        let floor = crate::stats::brownian_sup_abs_cdf(0.5);
        assert!(rep.acceptance_rate() >= floor);
    }

    #[test]
    fn nu_c_budget_error_carries_report() {
        let grid = GridSpec::new(257).unwrap();
        let mut rng = SeedTree::new(9).stream("budget");
        // tiny average makes nonnegativity essentially impossible
        let err = sample_nu_c(1e-6, &grid, &mut rng, 50).unwrap_err();
        match err {
            CoreError::RejectionBudget { report } => {
                assert_eq!(report.proposals, 50);
                assert_eq!(report.accepted, 0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn nu_c_eps_acceptance_monotone_in_eps() {
        let grid = GridSpec::new(129).unwrap();
        let c = 0.3;
        let mut rates = Vec::new();
        for (i, eps) in [0.05, 0.5, 5.0].iter().enumerate() {
            let params = PenalizationParams::new(*eps).unwrap();
            let mut rng = SeedTree::new(20).indexed("nueps", i as u64);
            let (_, rep) =
                sample_nu_c_eps_many(c, &params, &grid, &mut rng, 300, 100_000_000).unwrap();
            rates.push(rep.acceptance_rate());
        }
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }

    #[test]
    fn smooth_penalization_f_and_big_f_are_consistent() {
        let kind = PenalizationKind::SmoothNegativePart { delta: 0.1 };
        assert_eq!(kind.f(1.0), 0.0);
        assert_eq!(kind.big_f(1.0), 0.0);
        // F' = -f by central differences
        for &u in &[-2.0, -0.5, -0.05] {
            let h = 1e-6;
            let num = (kind.big_f(u + h) - kind.big_f(u - h)) / (2.0 * h);
            assert!((num + kind.f(u)).abs() < 1e-6, "u={u}");
        }
    }
}
