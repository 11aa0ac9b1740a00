//! Exponential-Euler spectral integrator for the penalized equation.
//!
//! Per mode n >= 1 the linear flow is an Ornstein-Uhlenbeck process with
//! rate `lambda_n = (n pi)^4 / 2` and exact one-step noise variance
//! `(1 - exp(-(n pi)^4 dt)) / (n pi)^2`; the scheme applies that flow
//! exactly and treats the penalization drift explicitly over the step with
//! the integrating-factor weight `(1 - exp(-lambda_n dt)) / lambda_n`.
//! Mode 0 is frozen: the conservative noise never charges it and neither
//! does the drift, so the average is conserved to the bit.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::functional::CylFunctional;
use crate::measures::{sample_nu_c_eps_many, PenalizationParams, DEFAULT_REJECTION_BUDGET};
use crate::rng::SeedTree;
use crate::spectral::{h_inner, CosineTransform, Field, GridSpec};
use crate::stats::{McEstimate, RunningStat};

/// Explicit-penalization stability guard: `dt <= DT_EPS_GUARD * eps`.
pub const DT_EPS_GUARD: f64 = 0.1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum Penalization {
    Off,
    On(PenalizationParams),
}

impl Penalization {
    pub fn params(&self) -> Option<&PenalizationParams> {
        match self {
            Penalization::Off => None,
            Penalization::On(p) => Some(p),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_modes: usize,
    pub m_points: usize,
    pub dt: f64,
    pub horizon: f64,
    pub c: f64,
    pub penalization: Penalization,
    pub record_states: bool,
    pub record_noise: bool,
}

impl SolverConfig {
    pub fn new(
        n_modes: usize,
        dt: f64,
        horizon: f64,
        c: f64,
        penalization: Penalization,
    ) -> Result<Self> {
        let cfg = Self {
            n_modes,
            m_points: 4 * n_modes + 1,
            dt,
            horizon,
            c,
            penalization,
            record_states: true,
            record_noise: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::require_positive("dt", self.dt)?;
        if let Penalization::On(p) = &self.penalization {
            let max_dt = DT_EPS_GUARD * p.eps;
            if self.dt > max_dt {
                return Err(CoreError::UnstableTimeStep {
                    dt: self.dt,
                    guard: DT_EPS_GUARD,
                    max_dt,
                });
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.m_points).expect("m_points >= 2")
    }
}

/// Exact one-step map of the linear (Ornstein-Uhlenbeck) flow. `noise`
/// holds one standard normal per mode; the entry for mode 0 is ignored.
pub fn ou_exact_step(state: &Field, dt: f64, noise: &[f64]) -> Field {
    let mut out = state.clone();
    for n in 1..=state.n_modes() {
        let npi2 = (n as f64 * PI).powi(2);
        let lambda = 0.5 * npi2 * npi2;
        let decay = (-lambda * dt).exp();
        let var = (1.0 - (-2.0 * lambda * dt).exp()) / npi2;
        let xi = noise.get(n).copied().unwrap_or(0.0);
        out.coeffs_mut()[n] = decay * state.coeff(n) + var.sqrt() * xi;
    }
    out
}

/// Spectral penalization drift `(n pi)^2 / (2 eps) <f(u), e_n>_L`, mode 0
/// annihilated. Pseudo-spectral evaluation: synthesize, apply f pointwise,
/// analyze back.
pub fn penalization_drift(
    state: &Field,
    params: &PenalizationParams,
    grid: &GridSpec,
) -> Result<Field> {
    let tr = CosineTransform::new(*grid, state.n_modes())?;
    let mut stepper_like = DriftScratch::new(tr);
    Ok(stepper_like.drift(state, params))
}

struct DriftScratch {
    transform: CosineTransform,
    vals: Vec<f64>,
    fvals: Vec<f64>,
    fcoef: Field,
}

impl DriftScratch {
    fn new(transform: CosineTransform) -> Self {
        let n = transform.n_modes();
        Self {
            transform,
            vals: Vec::new(),
            fvals: Vec::new(),
            fcoef: Field::zeros(n).unwrap(),
        }
    }

    fn drift(&mut self, state: &Field, params: &PenalizationParams) -> Field {
        self.transform.synthesize_into(state, &mut self.vals);
        self.fvals.clear();
        self.fvals
            .extend(self.vals.iter().map(|&v| params.kind.f(v)));
        self.transform.analyze_into(&self.fvals, &mut self.fcoef);
        let mut out = self.fcoef.clone();
        out.coeffs_mut()[0] = 0.0;
        for n in 1..=out.n_modes() {
            let npi2 = (n as f64 * PI).powi(2);
            out.coeffs_mut()[n] *= npi2 / (2.0 * params.eps);
        }
        out
    }
}

/// Cached per-step coefficients for a fixed configuration.
pub struct Stepper {
    cfg: SolverConfig,
    transform: CosineTransform,
    decay: Vec<f64>,
    noise_sd: Vec<f64>,
    drift_w: Vec<f64>,
    npi2: Vec<f64>,
    vals: Vec<f64>,
    fvals: Vec<f64>,
    fcoef: Field,
}

impl Stepper {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = GridSpec::new(cfg.m_points)?;
        let transform = CosineTransform::new(grid, cfg.n_modes)?;
        let n = cfg.n_modes;
        let mut decay = vec![1.0; n + 1];
        let mut noise_sd = vec![0.0; n + 1];
        let mut drift_w = vec![0.0; n + 1];
        let mut npi2 = vec![0.0; n + 1];
        for k in 1..=n {
            let p2 = (k as f64 * PI).powi(2);
            let lambda = 0.5 * p2 * p2;
            npi2[k] = p2;
            decay[k] = (-lambda * cfg.dt).exp();
            noise_sd[k] = ((1.0 - (-2.0 * lambda * cfg.dt).exp()) / p2).sqrt();
            drift_w[k] = (1.0 - decay[k]) / lambda;
        }
        Ok(Self {
            cfg,
            transform,
            decay,
            noise_sd,
            drift_w,
            npi2,
            vals: Vec::new(),
            fvals: Vec::new(),
            fcoef: Field::zeros(n)?,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn transform(&self) -> &CosineTransform {
        &self.transform
    }

    /// Fills `noise` with one standard normal per mode, leaving the 0-mode
    /// channel identically zero.
    pub fn draw_noise(&self, rng: &mut impl Rng, noise: &mut Vec<f64>) {
        noise.clear();
        noise.push(0.0);
        for _ in 1..=self.cfg.n_modes {
            noise.push(rng.sample(StandardNormal));
        }
    }

    /// Grid values of the current state (cached transform).
    pub fn values_of(&mut self, state: &Field) -> &[f64] {
        self.transform.synthesize_into(state, &mut self.vals);
        &self.vals
    }

    /// One exponential-Euler step in place. Returns the grid values of f(u)
    /// evaluated at the pre-step state via the scratch buffer, which the
    /// caller may inspect for the reflection-measure accumulators.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, state: &mut Field, noise: &[f64]) -> &[f64] {
        debug_assert_eq!(state.n_modes(), self.cfg.n_modes);
        self.transform.synthesize_into(state, &mut self.vals);
        match &self.cfg.penalization {
            Penalization::Off => {
                self.fvals.clear();
                self.fvals.resize(self.vals.len(), 0.0);
                for n in 1..=self.cfg.n_modes {
                    state.coeffs_mut()[n] =
                        self.decay[n] * state.coeff(n) + self.noise_sd[n] * noise[n];
                }
            }
            Penalization::On(p) => {
                self.fvals.clear();
                self.fvals.extend(self.vals.iter().map(|&v| p.kind.f(v)));
                self.transform.analyze_into(&self.fvals, &mut self.fcoef);
                for n in 1..=self.cfg.n_modes {
                    let drift = self.npi2[n] / (2.0 * p.eps) * self.fcoef.coeff(n);
                    state.coeffs_mut()[n] = self.decay[n] * state.coeff(n)
                        + self.drift_w[n] * drift
                        + self.noise_sd[n] * noise[n];
                }
            }
        }
        &self.fvals
    }
}

/// One explicit exponential-Euler step of the penalized equation.
pub fn step_penalized(state: &Field, cfg: &SolverConfig, noise: &[f64]) -> Result<Field> {
    let mut stepper = Stepper::new(*cfg)?;
    let mut s = state.clone();
    stepper.step(&mut s, noise);
    Ok(s)
}

/// A solved trajectory with the accumulated penalization measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States at every step time (first entry is the initial condition);
    /// empty when recording was disabled.
    pub states: Vec<Field>,
    /// Per-step mass `dt * (1/eps) int f(u_k) dtheta`, all entries >= 0.
    pub eta_mass_per_step: Vec<f64>,
    /// Spatial accumulation `sum_k dt * (1/eps) f(u_k(theta_i))` on the grid.
    pub eta_profile: Vec<f64>,
    /// Raw per-step standard-normal draws, mode 0 identically zero.
    pub noise: Option<Vec<Vec<f64>>>,
    pub final_state: Field,
}

impl Trajectory {
    pub fn eta_total_mass(&self) -> f64 {
        self.eta_mass_per_step.iter().sum()
    }
}

/// Integrate from `x0` (whose average must equal the configured conserved
/// average) over the configured horizon.
pub fn solve_path(x0: &Field, cfg: &SolverConfig, rng: &mut impl Rng) -> Result<Trajectory> {
    if (x0.average() - cfg.c).abs() > 1e-12 * cfg.c.abs().max(1.0) {
        return Err(CoreError::AverageMismatch {
            got: x0.average(),
            want: cfg.c,
        });
    }
    let mut stepper = Stepper::new(*cfg)?;
    let grid = cfg.grid();
    let quad_w = grid.trapezoid_weights();
    let n_steps = cfg.n_steps();

    let mut state = x0.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    let mut states = Vec::new();
    if cfg.record_states {
        states.push(state.clone());
    }
    let mut eta_mass = Vec::with_capacity(n_steps);
    let mut eta_profile = vec![0.0; cfg.m_points];
    let mut noise_log = if cfg.record_noise {
        Some(Vec::with_capacity(n_steps))
    } else {
        None
    };
    let mut noise = Vec::new();

    let inv_eps = cfg
        .penalization
        .params()
        .map(|p| 1.0 / p.eps)
        .unwrap_or(0.0);
    for k in 0..n_steps {
        stepper.draw_noise(rng, &mut noise);
        let fvals = stepper.step(&mut state, &noise);
        // left-endpoint rule in time for the reflection-measure accumulators
        let mut mass = 0.0;
        for ((f, w), prof) in fvals.iter().zip(&quad_w).zip(eta_profile.iter_mut()) {
            mass += f * w;
            *prof += cfg.dt * inv_eps * f;
        }
        eta_mass.push(cfg.dt * inv_eps * mass);
        if !state.is_finite() {
            return Err(CoreError::NonFiniteState {
                step: k,
                time: (k + 1) as f64 * cfg.dt,
            });
        }
        times.push((k + 1) as f64 * cfg.dt);
        if cfg.record_states {
            states.push(state.clone());
        }
        if let Some(log) = noise_log.as_mut() {
            log.push(noise.clone());
        }
    }

    Ok(Trajectory {
        times,
        states,
        eta_mass_per_step: eta_mass,
        eta_profile,
        noise: noise_log,
        final_state: state,
    })
}

/// Evolve two states with the same noise realization and record the decay
/// of their H-distance. Both initial conditions must share the average.
pub fn coupled_contraction(
    x: &Field,
    y: &Field,
    cfg: &SolverConfig,
    rng: &mut impl Rng,
) -> Result<Vec<(f64, f64)>> {
    if (x.average() - y.average()).abs() > 1e-12 * x.average().abs().max(1.0) {
        return Err(CoreError::AverageMismatch {
            got: y.average(),
            want: x.average(),
        });
    }
    let mut stepper = Stepper::new(*cfg)?;
    let mut a = x.clone();
    let mut b = y.clone();
    let mut noise = Vec::new();
    let mut curve = Vec::with_capacity(cfg.n_steps());
    for k in 0..cfg.n_steps() {
        stepper.draw_noise(rng, &mut noise);
        stepper.step(&mut a, &noise);
        stepper.step(&mut b, &noise);
        let mut d = a.clone();
        for (dc, bc) in d.coeffs_mut().iter_mut().zip(b.coeffs()) {
            *dc -= bc;
        }
        curve.push(((k + 1) as f64 * cfg.dt, h_inner(&d, &d).sqrt()));
    }
    Ok(curve)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    /// |E phi(X_t(x)) - nu(phi)| with Monte Carlo standard errors.
    pub gaps: Vec<McEstimate>,
    pub reference: McEstimate,
}

/// Monte Carlo decay of `E[phi(X_t(x))]` toward the invariant value
/// estimated from the exact Gibbs sampler.
pub fn ergodic_decay(
    x0: &Field,
    phi: &CylFunctional,
    cfg: &SolverConfig,
    sample_times: &[f64],
    n_replicas: usize,
    n_reference: usize,
    seeds: &SeedTree,
) -> Result<DecayCurve> {
    let params = match cfg.penalization {
        Penalization::On(p) => p,
        Penalization::Off => {
            return Err(CoreError::Invalid(
                "ergodic decay needs the penalized dynamics".into(),
            ))
        }
    };
    let grid = cfg.grid();
    let sample_steps: Vec<usize> = sample_times
        .iter()
        .map(|t| (t / cfg.dt).round() as usize)
        .collect();
    let max_step = sample_steps.iter().copied().max().unwrap_or(0);

    let mut stats = vec![RunningStat::default(); sample_times.len()];
    for rep in 0..n_replicas {
        let mut rng = seeds.indexed("ergodic-replica", rep as u64);
        let mut stepper = Stepper::new(*cfg)?;
        let mut state = x0.clone();
        let mut noise = Vec::new();
        for k in 1..=max_step {
            stepper.draw_noise(&mut rng, &mut noise);
            stepper.step(&mut state, &noise);
            for (slot, &s) in sample_steps.iter().enumerate() {
                if s == k {
                    stats[slot].push(phi.value_field(&state));
                }
            }
        }
    }

    let mut rng_ref = seeds.stream("ergodic-reference");
    let (paths, _) = sample_nu_c_eps_many(
        cfg.c,
        &params,
        &grid,
        &mut rng_ref,
        n_reference,
        DEFAULT_REJECTION_BUDGET,
    )?;
    let mut ref_stat = RunningStat::default();
    for p in &paths {
        let f = p.to_field(cfg.n_modes)?;
        ref_stat.push(phi.value_field(&f));
    }
    let reference = ref_stat.estimate();

    let gaps = stats
        .iter()
        .map(|s| {
            let e = s.estimate();
            McEstimate {
                mean: (e.mean - reference.mean).abs(),
                stderr: e.stderr.hypot(reference.stderr),
                n: e.n,
            }
        })
        .collect();

    Ok(DecayCurve {
        times: sample_times.to_vec(),
        gaps,
        reference,
    })
}
