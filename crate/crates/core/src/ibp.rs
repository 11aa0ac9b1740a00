//! Monte Carlo verification of the integration-by-parts identities and
//! absolute-continuity formulas satisfied by the invariant laws.
//!
//! Every identity is split into independently seeded estimators (one per
//! term) so the residual's standard error combines in quadrature, and every
//! report carries the residual in units of that combined error.
//!
//! Nonnegativity events are not grid-decidable; the default indicator
//! multiplies the grid check by the Brownian-bridge survival probability
//! `prod_i (1 - exp(-2 y_i y_{i+1} / h))`, an unbiased estimate of the
//! continuum indicator given the grid values. The plain grid indicator is
//! available for sensitivity runs; it carries an O(sqrt(h)) bias that the
//! 3-sigma gates at a million samples can see.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::functional::{CylFunctional, HalfPathFunctional, PreparedFunctional};
use crate::meander::{interp, sample_arcsine, MeanderSampler, DEFAULT_R_MARGIN};
use crate::measures::{brownian_into, mu_c_into, mu_into, PathSample, PenalizationParams};
use crate::rng::SeedTree;
use crate::spectral::{apply_a, project_pi, trapezoid, Field, GridSpec};
use crate::stats::{McEstimate, RunningStat};

/// How the nonnegativity indicator treats the continuum between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndicatorMode {
    /// Check grid values only (biased toward acceptance by excursions
    /// between grid points).
    GridOnly,
    /// Grid check times the per-cell Brownian-bridge survival probability.
    BridgeCorrected,
}

/// Weight in [0, 1] standing in for `1_{x >= 0 on [0, L]}`, where `values`
/// samples the path uniformly with spacing `h`.
pub fn nonneg_weight(values: &[f64], h: f64, mode: IndicatorMode) -> f64 {
    if values.iter().any(|&v| v < 0.0) {
        return 0.0;
    }
    match mode {
        IndicatorMode::GridOnly => 1.0,
        IndicatorMode::BridgeCorrected => {
            let mut p = 1.0;
            for pair in values.windows(2) {
                p *= 1.0 - (-2.0 * pair[0] * pair[1] / h).exp();
            }
            p
        }
    }
}

/// Gaussian weight of a path's time average: `rho(w) = exp(-w^2/2)/sqrt(2 pi)`.
pub fn weight_rho(omega_bar: f64) -> f64 {
    (-0.5 * omega_bar * omega_bar).exp() / (2.0 * PI).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IbpRunConfig {
    pub n_samples: usize,
    pub m_points: usize,
    pub indicator: IndicatorMode,
    /// Pass gate: |residual| <= check_sigmas * combined SE.
    pub check_sigmas: f64,
}

impl Default for IbpRunConfig {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            m_points: 257,
            indicator: IndicatorMode::BridgeCorrected,
            check_sigmas: 3.0,
        }
    }
}

/// Two independent estimates of the same quantity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub residual: McEstimate,
    pub residual_sigmas: f64,
    pub pass: bool,
}

impl TwoSidedReport {
    fn new(lhs: McEstimate, rhs: McEstimate, gate: f64) -> Self {
        let residual = lhs.minus(&rhs);
        let sig = residual.sigmas();
        Self {
            lhs,
            rhs,
            residual,
            residual_sigmas: sig,
            pass: sig <= gate,
        }
    }
}

/// The three terms of an integration-by-parts identity, with the residual
/// `lhs - bulk - boundary`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IbpReport {
    pub lhs: McEstimate,
    pub bulk: McEstimate,
    pub boundary: McEstimate,
    pub residual: McEstimate,
    pub residual_sigmas: f64,
    pub pass: bool,
    /// Deterministic-quadrature boundary estimate, when the second design
    /// was run alongside the importance-sampling one.
    pub boundary_alt: Option<McEstimate>,
    pub boundary_designs_sigmas: Option<f64>,
}

impl IbpReport {
    fn assemble(lhs: McEstimate, bulk: McEstimate, boundary: McEstimate, gate: f64) -> Self {
        let mean = lhs.mean - bulk.mean - boundary.mean;
        let stderr = (lhs.stderr.powi(2) + bulk.stderr.powi(2) + boundary.stderr.powi(2)).sqrt();
        let residual = McEstimate {
            mean,
            stderr,
            n: lhs.n.min(bulk.n).min(boundary.n),
        };
        let sig = residual.sigmas();
        Self {
            lhs,
            bulk,
            boundary,
            residual,
            residual_sigmas: sig,
            pass: sig <= gate,
            boundary_alt: None,
            boundary_designs_sigmas: None,
        }
    }
}

/// Absolute continuity of `mu` against a Brownian motion with random
/// starting level: `E[Phi(Y)] = sqrt(4/3) E[Phi(b + B) W(b, B)]`, with
/// `b ~ N(0, 4/3)` independent and the Gaussian reweighting
/// `W = exp(-(b + mean(B))^2 / 2 + 3 b^2 / 8)`.
pub fn verify_prop_a1(
    phi: &CylFunctional,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<TwoSidedReport> {
    let grid = GridSpec::new(cfg.m_points)?;
    let prep = PreparedFunctional::new(phi, &grid)?;
    let mut scratch = Vec::new();
    let mut path = Vec::new();

    let mut lhs = RunningStat::default();
    let mut rng = seeds.stream("a1-lhs");
    for _ in 0..cfg.n_samples {
        mu_into(&grid, &mut rng, &mut path);
        lhs.push(prep.value(&path, &mut scratch));
    }

    let mut rhs = RunningStat::default();
    let mut rng = seeds.stream("a1-rhs");
    let b_sd = (4.0f64 / 3.0).sqrt();
    let norm = (4.0f64 / 3.0).sqrt();
    for _ in 0..cfg.n_samples {
        let b: f64 = b_sd * rng.sample::<f64, _>(StandardNormal);
        brownian_into(&grid, &mut rng, &mut path);
        for v in path.iter_mut() {
            *v += b;
        }
        let path_mean = trapezoid(&path, &grid);
        let w = norm * (-0.5 * path_mean * path_mean + 0.375 * b * b).exp();
        rhs.push(prep.value(&path, &mut scratch) * w);
    }

    Ok(TwoSidedReport::new(
        lhs.estimate(),
        rhs.estimate(),
        cfg.check_sigmas,
    ))
}

struct BoundaryKernel72<'a> {
    grid: GridSpec,
    h_at: Vec<f64>,
    prep: &'a PreparedFunctional,
}

impl<'a> BoundaryKernel72<'a> {
    fn new(h: &Field, grid: GridSpec, prep: &'a PreparedFunctional) -> Self {
        Self {
            grid,
            h_at: h.coeffs().to_vec(),
            prep,
        }
    }

    fn h_eval(&self, r: f64) -> f64 {
        self.h_at
            .iter()
            .enumerate()
            .map(|(n, &a)| a * crate::spectral::basis_value(n, r))
            .sum()
    }

    /// One draw of the integrand of the signed boundary term at split r.
    #[allow(clippy::too_many_arguments)]
    fn draw(
        &self,
        r: f64,
        sampler: &mut MeanderSampler,
        rng: &mut impl Rng,
        m_buf: &mut Vec<f64>,
        mh_buf: &mut Vec<f64>,
        u_buf: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        sampler.sample_into(rng, m_buf);
        sampler.sample_into(rng, mh_buf);
        u_r_values_into(r, m_buf, mh_buf, &self.grid, u_buf);
        let ubar = trapezoid(u_buf, &self.grid);
        let phi_u = self.prep.value(u_buf, scratch);
        -self.h_eval(r) * weight_rho(ubar) * phi_u
    }
}

pub(crate) fn u_r_values_into(
    r: f64,
    m_vals: &[f64],
    mh_vals: &[f64],
    grid: &GridSpec,
    out: &mut Vec<f64>,
) {
    out.clear();
    let mpts = grid.m_points();
    let sr = r.sqrt();
    let s1r = (1.0 - r).sqrt();
    for i in 0..mpts {
        let theta = grid.theta(i);
        let v = if theta <= r {
            sr * interp(m_vals, (r - theta) / r)
        } else {
            s1r * interp(mh_vals, (theta - r) / (1.0 - r))
        };
        out.push(v);
    }
}

/// Integration by parts for the law of `Y ~ mu` on the nonnegative cone:
/// derivative term = bulk term + boundary term over paths pinned to zero.
/// The boundary integral is estimated two ways: sampling the split from the
/// arcsine law, and a deterministic midpoint rule in the arcsine-uniform
/// variable with inner Monte Carlo.
pub fn verify_ibp_72(
    phi: &CylFunctional,
    h: &Field,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<IbpReport> {
    let grid = GridSpec::new(cfg.m_points)?;
    let spacing = grid.spacing();
    let prep = PreparedFunctional::new(phi, &grid)?;
    let mut scratch = Vec::new();
    let mut path = Vec::new();

    // lhs: E[d_h Phi(Y) 1_K]
    let mut lhs = RunningStat::default();
    let mut rng = seeds.stream("ibp72-lhs");
    for _ in 0..cfg.n_samples {
        mu_into(&grid, &mut rng, &mut path);
        let w = nonneg_weight(&path, spacing, cfg.indicator);
        if w > 0.0 {
            lhs.push(w * prep.directional_derivative(&path, h, &mut scratch));
        } else {
            lhs.push(0.0);
        }
    }

    // bulk: -E[(<Y, h''> - mean(Y) mean(h)) Phi(Y) 1_K]
    let hpp = apply_a(h);
    let w_quad = grid.trapezoid_weights();
    let hpp_w: Vec<f64> = grid
        .points()
        .iter()
        .zip(&w_quad)
        .map(|(&t, &w)| hpp.eval(t) * w)
        .collect();
    let h_mean = h.coeff(0);
    let mut bulk = RunningStat::default();
    let mut rng = seeds.stream("ibp72-bulk");
    for _ in 0..cfg.n_samples {
        mu_into(&grid, &mut rng, &mut path);
        let w = nonneg_weight(&path, spacing, cfg.indicator);
        if w > 0.0 {
            let y_hpp: f64 = hpp_w.iter().zip(&path).map(|(a, b)| a * b).sum();
            let y_mean = trapezoid(&path, &grid);
            bulk.push(-w * (y_hpp - y_mean * h_mean) * prep.value(&path, &mut scratch));
        } else {
            bulk.push(0.0);
        }
    }

    // boundary, importance design: r ~ arcsine so the 1/sqrt(r(1-r)) factor
    // cancels and each draw weighs rho(mean(U_r)) h(r) Phi(U_r).
    let kernel = BoundaryKernel72::new(h, grid, &prep);
    let mut sampler = MeanderSampler::new(grid);
    let (mut m_buf, mut mh_buf, mut u_buf) = (Vec::new(), Vec::new(), Vec::new());
    let mut boundary = RunningStat::default();
    let mut rng = seeds.stream("ibp72-boundary");
    for _ in 0..cfg.n_samples {
        let r = sample_arcsine(&mut rng).clamp(DEFAULT_R_MARGIN, 1.0 - DEFAULT_R_MARGIN);
        boundary.push(kernel.draw(
            r,
            &mut sampler,
            &mut rng,
            &mut m_buf,
            &mut mh_buf,
            &mut u_buf,
            &mut scratch,
        ));
    }

    // boundary, deterministic design: midpoint rule in the arcsine-uniform
    // coordinate u with a small inner Monte Carlo per node.
    let nodes = 48usize;
    let inner = (cfg.n_samples / (4 * nodes)).max(500);
    let mut rng = seeds.stream("ibp72-boundary-quad");
    let mut node_means = Vec::with_capacity(nodes);
    let mut node_vars = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let u = (k as f64 + 0.5) / nodes as f64;
        let s = (0.5 * PI * u).sin();
        let r = (s * s).clamp(DEFAULT_R_MARGIN, 1.0 - DEFAULT_R_MARGIN);
        let mut acc = RunningStat::default();
        for _ in 0..inner {
            acc.push(kernel.draw(
                r,
                &mut sampler,
                &mut rng,
                &mut m_buf,
                &mut mh_buf,
                &mut u_buf,
                &mut scratch,
            ));
        }
        node_means.push(acc.mean());
        node_vars.push(acc.variance() / inner as f64);
    }
    let alt_mean = node_means.iter().sum::<f64>() / nodes as f64;
    let alt_se = (node_vars.iter().sum::<f64>() / (nodes * nodes) as f64).sqrt();
    let boundary_alt = McEstimate {
        mean: alt_mean,
        stderr: alt_se,
        n: (nodes * inner) as u64,
    };

    let mut report = IbpReport::assemble(
        lhs.estimate(),
        bulk.estimate(),
        boundary.estimate(),
        cfg.check_sigmas,
    );
    let diff = report.boundary.minus(&boundary_alt);
    report.boundary_designs_sigmas = Some(diff.sigmas());
    report.boundary_alt = Some(boundary_alt);
    Ok(report)
}

/// The conditioned version on a fixed average `c`: derivative along the
/// mean-zero part of h, with the boundary term estimated by Gaussian-kernel
/// conditioning of unconditioned pinned paths on `mean(U_r) ~ c`.
pub fn verify_cor_72(
    phi: &CylFunctional,
    h: &Field,
    c: f64,
    bandwidth: f64,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<IbpReport> {
    crate::error::require_positive("c", c)?;
    let grid = GridSpec::new(cfg.m_points)?;
    let spacing = grid.spacing();
    let prep = PreparedFunctional::new(phi, &grid)?;
    let mut scratch = Vec::new();
    let mut path = Vec::new();
    let pih = project_pi(h);

    let mut lhs = RunningStat::default();
    let mut rng = seeds.stream("cor72-lhs");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let w = nonneg_weight(&path, spacing, cfg.indicator);
        if w > 0.0 {
            lhs.push(w * prep.directional_derivative(&path, &pih, &mut scratch));
        } else {
            lhs.push(0.0);
        }
    }

    let hpp = apply_a(h);
    let w_quad = grid.trapezoid_weights();
    let hpp_w: Vec<f64> = grid
        .points()
        .iter()
        .zip(&w_quad)
        .map(|(&t, &w)| hpp.eval(t) * w)
        .collect();
    let mut bulk = RunningStat::default();
    let mut rng = seeds.stream("cor72-bulk");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let w = nonneg_weight(&path, spacing, cfg.indicator);
        if w > 0.0 {
            let y_hpp: f64 = hpp_w.iter().zip(&path).map(|(a, b)| a * b).sum();
            bulk.push(-w * y_hpp * prep.value(&path, &mut scratch));
        } else {
            bulk.push(0.0);
        }
    }

    // boundary with Nadaraya-Watson style kernel weights on mean(U_r)
    let mut sampler = MeanderSampler::new(grid);
    let (mut m_buf, mut mh_buf, mut u_buf) = (Vec::new(), Vec::new(), Vec::new());
    let mut boundary = RunningStat::default();
    let mut rng = seeds.stream("cor72-boundary");
    let kern_norm = 1.0 / (bandwidth * (2.0 * PI).sqrt());
    let mut w_sum = 0.0;
    let mut w2_sum = 0.0;
    for _ in 0..cfg.n_samples {
        let r = sample_arcsine(&mut rng).clamp(DEFAULT_R_MARGIN, 1.0 - DEFAULT_R_MARGIN);
        sampler.sample_into(&mut rng, &mut m_buf);
        sampler.sample_into(&mut rng, &mut mh_buf);
        u_r_values_into(r, &m_buf, &mh_buf, &grid, &mut u_buf);
        let ubar = trapezoid(&u_buf, &grid);
        let z = (ubar - c) / bandwidth;
        let kern = kern_norm * (-0.5 * z * z).exp();
        w_sum += kern;
        w2_sum += kern * kern;
        let pih_r = pih.eval(r);
        boundary.push(-pih_r * kern * prep.value(&u_buf, &mut scratch));
    }
    let ess = if w2_sum > 0.0 {
        w_sum * w_sum / w2_sum
    } else {
        0.0
    };
    if ess < 100.0 {
        return Err(CoreError::KernelStarved { ess, min: 100.0 });
    }

    Ok(IbpReport::assemble(
        lhs.estimate(),
        bulk.estimate(),
        boundary.estimate(),
        cfg.check_sigmas,
    ))
}

fn half_points_of(grid: &GridSpec) -> Result<usize> {
    let m = grid.m_points();
    if m.is_multiple_of(2) {
        return Err(CoreError::Invalid(format!(
            "half-interval constructions need an odd grid (theta = 1/2 on a point), got {m}"
        )));
    }
    Ok(m / 2 + 1)
}

/// `gamma(w) = int_0^{1/2} w + w(1/2)/2` by trapezoid on the half grid.
pub fn gamma_half(half_values: &[f64], h: f64) -> f64 {
    let last = half_values.len() - 1;
    let mut acc = 0.0;
    for (i, &v) in half_values.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 * h } else { h };
        acc += w * v;
    }
    acc + 0.5 * half_values[last]
}

fn brownian_half_into(half_points: usize, h: f64, rng: &mut impl Rng, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(half_points);
    out.push(0.0);
    let mut acc = 0.0;
    let sd = h.sqrt();
    for _ in 1..half_points {
        let xi: f64 = rng.sample(StandardNormal);
        acc += sd * xi;
        out.push(acc);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaB1Report {
    /// Change of measure on the half interval: `E[Psi(Y^c)]` against the
    /// reweighted Brownian side of (the absolute-continuity identity).
    pub b2: TwoSidedReport,
    /// Half-interval integration by parts: derivative vs bulk + boundary.
    pub b3: IbpReport,
}

/// Absolute continuity (B.2) and integration by parts (B.3) for the law of
/// `Y^c` restricted to `[0, 1/2]`.
pub fn verify_lemma_b1(
    psi: &HalfPathFunctional,
    c: f64,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<LemmaB1Report> {
    crate::error::require_positive("c", c)?;
    let grid = GridSpec::new(cfg.m_points)?;
    let spacing = grid.spacing();
    let half = half_points_of(&grid)?;
    let mut path = Vec::new();

    // (B.2) lhs over Y^c restricted to the half interval
    let mut b2_lhs = RunningStat::default();
    let mut rng = seeds.stream("b2-lhs");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        b2_lhs.push(psi.value(&path[..half]));
    }

    // (B.2) rhs: b + Brownian on [0, 1/2], weight sqrt(32) e^{-12 (gamma - c)^2 + 3 b^2 / 8}
    let mut b2_rhs = RunningStat::default();
    let mut rng = seeds.stream("b2-rhs");
    let b_sd = (4.0f64 / 3.0).sqrt();
    let norm = 32.0f64.sqrt();
    for _ in 0..cfg.n_samples {
        let b: f64 = b_sd * rng.sample::<f64, _>(StandardNormal);
        brownian_half_into(half, spacing, &mut rng, &mut path);
        for v in path.iter_mut() {
            *v += b;
        }
        let g = gamma_half(&path, spacing);
        let w = norm * (-12.0 * (g - c) * (g - c) + 0.375 * b * b).exp();
        b2_rhs.push(psi.value(&path) * w);
    }
    let b2 = TwoSidedReport::new(b2_lhs.estimate(), b2_rhs.estimate(), cfg.check_sigmas);

    // (B.3) lhs: E[d_1 Psi(Y^c) 1_{nonneg on [0,1/2]}]
    let mut b3_lhs = RunningStat::default();
    let mut rng = seeds.stream("b3-lhs");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let w = nonneg_weight(&path[..half], spacing, cfg.indicator);
        if w > 0.0 {
            b3_lhs.push(w * psi.shift_derivative(&path[..half]));
        } else {
            b3_lhs.push(0.0);
        }
    }

    // (B.3) bulk: E[24 (gamma(Y^c) - c) Psi(Y^c) 1_{Khat}]
    let mut b3_bulk = RunningStat::default();
    let mut rng = seeds.stream("b3-bulk");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let w = nonneg_weight(&path[..half], spacing, cfg.indicator);
        if w > 0.0 {
            let g = gamma_half(&path[..half], spacing);
            b3_bulk.push(w * 24.0 * (g - c) * psi.value(&path[..half]));
        } else {
            b3_bulk.push(0.0);
        }
    }

    // (B.3) boundary: splits from the arcsine law on [0, 1/2]; in the
    // arcsine-uniform variable the integrand is sqrt(12/pi) Psi(T_r)
    // exp(-12 (gamma(T_r) - c)^2). Signed so that lhs = bulk + boundary.
    let meander_grid = GridSpec::new(cfg.m_points)?;
    let mut sampler = MeanderSampler::new(meander_grid);
    let (mut m_buf, mut mh_buf) = (Vec::new(), Vec::new());
    let mut t_buf = Vec::new();
    let mut b3_bnd = RunningStat::default();
    let mut rng = seeds.stream("b3-boundary");
    let pref = (12.0 / PI).sqrt();
    for _ in 0..cfg.n_samples {
        let s = sample_arcsine(&mut rng).clamp(DEFAULT_R_MARGIN, 1.0 - DEFAULT_R_MARGIN);
        let r = 0.5 * s;
        sampler.sample_into(&mut rng, &mut m_buf);
        sampler.sample_into(&mut rng, &mut mh_buf);
        t_r_values_into(r, &m_buf, &mh_buf, half, spacing, &mut t_buf);
        let g = gamma_half(&t_buf, spacing);
        b3_bnd.push(-pref * psi.value(&t_buf) * (-12.0 * (g - c) * (g - c)).exp());
    }

    let b3 = IbpReport::assemble(
        b3_lhs.estimate(),
        b3_bulk.estimate(),
        b3_bnd.estimate(),
        cfg.check_sigmas,
    );

    Ok(LemmaB1Report { b2, b3 })
}

pub(crate) fn t_r_values_into(
    r: f64,
    m_vals: &[f64],
    mh_vals: &[f64],
    half_points: usize,
    h: f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    let sr = r.sqrt();
    let s1r = (0.5 - r).sqrt();
    for i in 0..half_points {
        let theta = i as f64 * h;
        let v = if theta <= r {
            sr * interp(m_vals, (r - theta) / r)
        } else {
            s1r * interp(mh_vals, (theta - r) / (0.5 - r))
        };
        out.push(v);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct B4Report {
    pub identity: TwoSidedReport,
    /// Mass of the penalized boundary approximation,
    /// `(1/eps) E[int_0^{1/2} f(Y^c) dr e^{-Uhat_eps(Y^c)}]`.
    pub sigma_mass: McEstimate,
}

/// Penalized half-interval identity: tilting by `exp(-Uhat_eps)` instead of
/// conditioning. Everything is a direct expectation over `mu_c` samples, so
/// this one needs no indicator at all.
pub fn verify_b4(
    psi: &HalfPathFunctional,
    c: f64,
    eps: f64,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<B4Report> {
    let params = PenalizationParams::new(eps)?;
    let grid = GridSpec::new(cfg.m_points)?;
    let spacing = grid.spacing();
    let half = half_points_of(&grid)?;
    let mut path = Vec::new();

    let half_tilt = |vals: &[f64]| -> (f64, f64) {
        // (Uhat_eps, int_0^{1/2} f) with trapezoid weights on [0, 1/2]
        let last = half - 1;
        let mut u = 0.0;
        let mut fint = 0.0;
        for (i, &v) in vals[..half].iter().enumerate() {
            let w = if i == 0 || i == last {
                0.5 * spacing
            } else {
                spacing
            };
            u += w * params.kind.big_f(v);
            fint += w * params.kind.f(v);
        }
        (u / eps, fint)
    };

    let mut lhs = RunningStat::default();
    let mut rng = seeds.stream("b4-lhs");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let (u, _) = half_tilt(&path);
        lhs.push(psi.shift_derivative(&path[..half]) * (-u).exp());
    }

    let mut rhs = RunningStat::default();
    let mut sigma = RunningStat::default();
    let mut rng = seeds.stream("b4-rhs");
    for _ in 0..cfg.n_samples {
        mu_c_into(c, &grid, &mut rng, &mut path);
        let (u, fint) = half_tilt(&path);
        let e = (-u).exp();
        let g = gamma_half(&path[..half], spacing);
        let p = psi.value(&path[..half]);
        let sig_term = fint / eps * e;
        sigma.push(sig_term);
        rhs.push(24.0 * (g - c) * p * e - sig_term * p);
    }

    Ok(B4Report {
        identity: TwoSidedReport::new(lhs.estimate(), rhs.estimate(), cfg.check_sigmas),
        sigma_mass: sigma.estimate(),
    })
}

/// The mass `(1/eps) E[int_0^{1/2} f(Y^c) dr e^{-Uhat_eps}]` on its own,
/// for the vanishing-penalization trend against the (B.3) boundary value.
pub fn sigma_hat_mass(
    c: f64,
    eps: f64,
    cfg: &IbpRunConfig,
    seeds: &SeedTree,
) -> Result<McEstimate> {
    let r = verify_b4(&HalfPathFunctional::One, c, eps, cfg, seeds)?;
    Ok(r.sigma_mass)
}

/// Glue a fresh Brownian branch onto a half-interval path so that the full
/// path has time average exactly c: the correction profile `12 s (1 - s)`
/// integrates to one over `[0, 1/2]`.
pub fn conditional_bridge(
    c: f64,
    omega_half: &[f64],
    grid: &GridSpec,
    rng: &mut impl Rng,
) -> Result<PathSample> {
    let half = half_points_of(grid)?;
    if omega_half.len() != half {
        return Err(CoreError::SizeMismatch {
            left: omega_half.len(),
            right: half,
            context: "half path vs grid",
        });
    }
    let spacing = grid.spacing();
    let mut fresh = Vec::new();
    brownian_half_into(half, spacing, rng, &mut fresh);
    // trapezoid integral of the fresh branch over [0, 1/2]
    let mut int_fresh = 0.0;
    for (i, &v) in fresh.iter().enumerate() {
        let w = if i == 0 || i == half - 1 {
            0.5 * spacing
        } else {
            spacing
        };
        int_fresh += w * v;
    }
    let gamma = gamma_half(omega_half, spacing);
    let correction = int_fresh + gamma - c;

    let m = grid.m_points();
    let mut values = Vec::with_capacity(m);
    values.extend_from_slice(omega_half);
    let omega_end = omega_half[half - 1];
    for i in half..m {
        let s = grid.theta(i) - 0.5;
        let rho = 12.0 * s * (1.0 - s);
        values.push(omega_end + fresh[i - (half - 1)] - rho * correction);
    }
    PathSample::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::OuterKind;
    use crate::measures::sample_mu_c;

    fn small_cfg(n: usize) -> IbpRunConfig {
        IbpRunConfig {
            n_samples: n,
            m_points: 129,
            indicator: IndicatorMode::BridgeCorrected,
            check_sigmas: 3.5,
        }
    }

    #[test]
    fn rho_values() {
        assert!((weight_rho(0.0) - 0.3989422804014327).abs() < 1e-15);
        assert!(weight_rho(40.0) < 1e-300);
        assert_eq!(weight_rho(1.3), weight_rho(-1.3));
    }

    #[test]
    fn nonneg_weight_modes() {
        let h = 0.01;
        let neg = [0.5, -0.1, 0.4];
        assert_eq!(nonneg_weight(&neg, h, IndicatorMode::GridOnly), 0.0);
        assert_eq!(nonneg_weight(&neg, h, IndicatorMode::BridgeCorrected), 0.0);
        let pos = [0.1, 0.05, 0.08];
        assert_eq!(nonneg_weight(&pos, h, IndicatorMode::GridOnly), 1.0);
        let w = nonneg_weight(&pos, h, IndicatorMode::BridgeCorrected);
        assert!(w > 0.0 && w < 1.0);
        let expect =
            (1.0 - (-2.0f64 * 0.1 * 0.05 / h).exp()) * (1.0 - (-2.0f64 * 0.05 * 0.08 / h).exp());
        assert!((w - expect).abs() < 1e-15);
        // far from the boundary the correction is negligible
        let high = [50.0, 51.0, 49.5];
        assert!(nonneg_weight(&high, h, IndicatorMode::BridgeCorrected) > 1.0 - 1e-12);
    }

    #[test]
    fn prop_a1_mass_and_mean_functional() {
        let seeds = SeedTree::new(100);
        let cfg = small_cfg(120_000);
        // Phi = 1: the reweighted side must integrate to one
        let one = CylFunctional::constant_one(4);
        let r = verify_prop_a1(&one, &cfg, &seeds).unwrap();
        assert!((r.rhs.mean - 1.0).abs() < 3.0 * r.rhs.stderr, "{:?}", r.rhs);
        assert!(r.pass, "residual {} sigmas", r.residual_sigmas);
        // Phi = mean: both sides vanish
        let mean = CylFunctional::mean(4);
        let r = verify_prop_a1(&mean, &cfg, &seeds.child("mean")).unwrap();
        assert!(r.lhs.mean.abs() < 3.0 * r.lhs.stderr);
        assert!(r.pass);
    }

    #[test]
    fn prop_a1_sin_functional() {
        let seeds = SeedTree::new(101);
        let cfg = small_cfg(150_000);
        let phi = CylFunctional::of_mode(OuterKind::Sin, 1, 8);
        let r = verify_prop_a1(&phi, &cfg, &seeds).unwrap();
        assert!(r.pass, "residual {} sigmas", r.residual_sigmas);
    }

    #[test]
    fn ibp72_balance_for_constant_functional() {
        // Phi = 1, h = e_0: lhs = 0 and the identity reduces to
        // E[mean(Y) 1_K] = boundary integral.
        let seeds = SeedTree::new(102);
        let cfg = small_cfg(150_000);
        let one = CylFunctional::constant_one(4);
        let h = Field::basis(0, 4).unwrap();
        let r = verify_ibp_72(&one, &h, &cfg, &seeds).unwrap();
        assert_eq!(r.lhs.mean, 0.0);
        assert!(r.pass, "residual {} sigmas", r.residual_sigmas);
        // boundary designs agree
        assert!(r.boundary_designs_sigmas.unwrap() < 3.5);
    }

    #[test]
    fn ibp72_zero_direction_is_degenerate_zero() {
        let seeds = SeedTree::new(103);
        let cfg = small_cfg(2_000);
        let one = CylFunctional::constant_one(4);
        let h = Field::zeros(4).unwrap();
        let r = verify_ibp_72(&one, &h, &cfg, &seeds).unwrap();
        assert_eq!(r.lhs.mean, 0.0);
        assert_eq!(r.bulk.mean, 0.0);
        assert_eq!(r.boundary.mean, 0.0);
    }

    #[test]
    fn cor72_e0_direction_vanishes_termwise() {
        let seeds = SeedTree::new(104);
        let cfg = small_cfg(2_000);
        let phi = CylFunctional::of_mode(OuterKind::Sin, 1, 4);
        let h = Field::basis(0, 4).unwrap();
        let r = verify_cor_72(&phi, &h, 1.0, 0.05, &cfg, &seeds).unwrap();
        assert_eq!(r.lhs.mean, 0.0);
        assert_eq!(r.bulk.mean, 0.0);
        assert_eq!(r.boundary.mean, 0.0);
    }

    #[test]
    fn b2_mass_is_one() {
        let seeds = SeedTree::new(105);
        let cfg = small_cfg(120_000);
        let r = verify_lemma_b1(&HalfPathFunctional::One, 1.0, &cfg, &seeds).unwrap();
        assert!(
            (r.b2.rhs.mean - 1.0).abs() < 3.0 * r.b2.rhs.stderr,
            "{:?}",
            r.b2.rhs
        );
        // for Psi = 1 the (B.3) lhs vanishes and bulk balances the boundary
        assert_eq!(r.b3.lhs.mean, 0.0);
        assert!(r.b3.pass, "residual {} sigmas", r.b3.residual_sigmas);
    }

    #[test]
    fn b4_smooth_regime_and_nonnegative_mass() {
        let seeds = SeedTree::new(106);
        let cfg = small_cfg(120_000);
        let psi = HalfPathFunctional::SinAt(0.25);
        let r = verify_b4(&psi, 1.0, 10.0, &cfg, &seeds).unwrap();
        assert!(r.identity.pass, "{} sigmas", r.identity.residual_sigmas);
        assert!(r.sigma_mass.mean >= 0.0);
    }

    #[test]
    fn conditional_bridge_continuity_and_exact_average() {
        let grid = GridSpec::new(129).unwrap();
        let half = 65;
        let mut rng = SeedTree::new(107).stream("bridge");
        for _ in 0..50 {
            let y = sample_mu_c(1.0, &grid, &mut rng);
            let omega = &y.values[..half];
            let glued = conditional_bridge(1.0, omega, &grid, &mut rng).unwrap();
            // continuous at theta = 1/2
            assert_eq!(glued.values[half - 1], omega[half - 1]);
            // the correction profile integrates to one, so the full-path
            // average is restored exactly up to quadrature roundoff
            assert!((glued.average() - 1.0).abs() < 1e-3, "{}", glued.average());
        }
    }

    #[test]
    fn conditional_bridge_needs_odd_grid() {
        let grid = GridSpec::new(128).unwrap();
        let mut rng = SeedTree::new(108).stream("bridge2");
        let omega = vec![0.0; 64];
        assert!(conditional_bridge(1.0, &omega, &grid, &mut rng).is_err());
    }
}
