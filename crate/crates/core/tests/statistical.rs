//! Statistical oracle tests that go beyond per-module unit checks: each one
//! validates a sampler or estimator against an independent construction.

use rand::Rng;
use rand_distr::StandardNormal;

use chr_core::functional::{CylFunctional, OuterKind};
use chr_core::ibp::{conditional_bridge, verify_cor_72, IbpRunConfig, IndicatorMode};
use chr_core::meander::{sample_meander, MeanderSampler};
use chr_core::measures::{
    sample_mu, sample_mu_c, sample_nu_c_eps_many, sample_nu_c_many, PenalizationParams,
};
use chr_core::rng::SeedTree;
use chr_core::solver::{ergodic_decay, Penalization, SolverConfig};
use chr_core::spectral::{Field, GridSpec};
use chr_core::stats::{ks_two_sample, RunningStat};

/// Gaussian random walk conditioned to stay positive, rescaled: the Donsker
/// oracle for the meander construction. Walks die as soon as they go
/// nonpositive, so the expected cost per accepted path is O(sqrt(n)).
fn conditioned_walk_samples(
    n_target: usize,
    n_steps: usize,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let scale = 1.0 / (n_steps as f64).sqrt();
    let mut endpoints = Vec::with_capacity(n_target);
    let mut midpoints = Vec::with_capacity(n_target);
    while endpoints.len() < n_target {
        let mut s = 0.0f64;
        let mut mid = 0.0f64;
        let mut alive = true;
        for k in 1..=n_steps {
            let xi: f64 = rng.sample(StandardNormal);
            s += xi;
            if s <= 0.0 {
                alive = false;
                break;
            }
            if k == n_steps / 2 {
                mid = s;
            }
        }
        if alive {
            endpoints.push(s * scale);
            midpoints.push(mid * scale);
        }
    }
    (endpoints, midpoints)
}

#[test]
fn meander_matches_conditioned_walk_oracle() {
    let seeds = SeedTree::new(301);
    let mut rng = seeds.stream("walk");
    let (walk_end, walk_mid) = conditioned_walk_samples(5_000, 10_000, &mut rng);

    let grid = GridSpec::new(513).unwrap();
    let mut rng = seeds.stream("meander");
    let mut sampler = MeanderSampler::new(grid);
    let mut buf = Vec::new();
    let n = 50_000;
    let mut m_end = Vec::with_capacity(n);
    let mut m_mid = Vec::with_capacity(n);
    for _ in 0..n {
        sampler.sample_into(&mut rng, &mut buf);
        m_end.push(*buf.last().unwrap());
        m_mid.push(buf[buf.len() / 2]);
    }

    // Bonferroni over the two functionals at overall alpha = 0.01
    let ks_end = ks_two_sample(&walk_end, &m_end);
    let ks_mid = ks_two_sample(&walk_mid, &m_mid);
    assert!(
        ks_end.p_value > 0.005,
        "endpoint: D={} p={}",
        ks_end.statistic,
        ks_end.p_value
    );
    assert!(
        ks_mid.p_value > 0.005,
        "midpoint: D={} p={}",
        ks_mid.statistic,
        ks_mid.p_value
    );
}

#[test]
fn nu_c_eps_interpolates_between_mu_c_and_nu_c() {
    let grid = GridSpec::new(257).unwrap();
    let c = 1.0;
    let n = 4_000;
    let seeds = SeedTree::new(302);
    let idx = grid.nearest_index(0.5);

    // large eps: the tilt is negligible and the marginals match mu_c
    let params = PenalizationParams::new(50.0).unwrap();
    let mut rng = seeds.stream("soft");
    let (soft, _) = sample_nu_c_eps_many(c, &params, &grid, &mut rng, n, u64::MAX).unwrap();
    let mut rng = seeds.stream("muc");
    let free: Vec<f64> = (0..n)
        .map(|_| sample_mu_c(c, &grid, &mut rng).values[idx])
        .collect();
    let soft_m: Vec<f64> = soft.iter().map(|p| p.values[idx]).collect();
    let ks = ks_two_sample(&soft_m, &free);
    assert!(ks.p_value > 0.01, "vs mu_c: p = {}", ks.p_value);

    // small eps: the tilt approaches the hard constraint. The residual
    // eps-gap is a genuine few-percent CDF shift, so the sample size is
    // matched to the desk-scale resolution of that comparison.
    let n = 2_500;
    let params = PenalizationParams::new(0.01).unwrap();
    let mut rng = seeds.stream("tight");
    let (tight, _) = sample_nu_c_eps_many(c, &params, &grid, &mut rng, n, u64::MAX).unwrap();
    let mut rng = seeds.stream("hard");
    let (hard, _) = sample_nu_c_many(c, &grid, &mut rng, n, u64::MAX).unwrap();
    let tight_m: Vec<f64> = tight.iter().map(|p| p.values[idx]).collect();
    let hard_m: Vec<f64> = hard.iter().map(|p| p.values[idx]).collect();
    let ks = ks_two_sample(&tight_m, &hard_m);
    assert!(ks.p_value > 0.01, "vs nu_c: p = {}", ks.p_value);
}

#[test]
fn cor72_residual_and_bandwidth_stability() {
    // kernel-conditioned boundary: wider gate (4 sigma) for the kernel bias
    let cfg = IbpRunConfig {
        n_samples: 250_000,
        m_points: 129,
        indicator: IndicatorMode::BridgeCorrected,
        check_sigmas: 4.0,
    };
    let seeds = SeedTree::new(303);
    let phi = CylFunctional::constant_one(8);
    let h = Field::basis(1, 8).unwrap();
    let c = 1.0;
    let r = verify_cor_72(&phi, &h, c, 0.05, &cfg, &seeds).unwrap();
    assert!(
        r.residual_sigmas <= 4.0,
        "residual {} sigmas (lhs {:?} bulk {:?} boundary {:?})",
        r.residual_sigmas,
        r.lhs,
        r.bulk,
        r.boundary
    );
    // halving the bandwidth moves the residual by less than the combined
    // statistical resolution
    let r_half = verify_cor_72(&phi, &h, c, 0.025, &cfg, &seeds.child("half")).unwrap();
    let shift = (r.residual.mean - r_half.residual.mean).abs();
    let tol = 4.0 * r.residual.stderr.hypot(r_half.residual.stderr);
    assert!(shift <= tol, "bandwidth shift {shift} vs tol {tol}");
}

#[test]
fn conditional_bridge_reproduces_the_conditioned_law() {
    // glue a fresh branch onto the first half of a fixed-average path; the
    // result must be distributed as the fixed-average law itself
    let grid = GridSpec::new(257).unwrap();
    let half = 129;
    let c = 1.0;
    let n = 30_000;
    let seeds = SeedTree::new(304);
    let mut rng = seeds.stream("paths");
    let mut glued_at: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    let mut direct_at: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    let probes = [0.6, 0.8, 1.0];
    for _ in 0..n {
        let y = sample_mu_c(c, &grid, &mut rng);
        let glued = conditional_bridge(c, &y.values[..half], &grid, &mut rng).unwrap();
        let y2 = sample_mu_c(c, &grid, &mut rng);
        for (k, &t) in probes.iter().enumerate() {
            glued_at[k].push(glued.value_at(t));
            direct_at[k].push(y2.value_at(t));
        }
    }
    for (k, &t) in probes.iter().enumerate() {
        let ks = ks_two_sample(&glued_at[k], &direct_at[k]);
        assert!(
            ks.p_value > 0.01 / 3.0,
            "theta={t}: D={} p={}",
            ks.statistic,
            ks.p_value
        );
    }
}

#[test]
fn ergodic_decay_flat_at_stationarity_and_decaying_from_afar() {
    let eps = 0.2;
    let c = 1.0;
    let cfg = SolverConfig {
        n_modes: 16,
        m_points: 65,
        dt: 0.005,
        horizon: 1.0,
        c,
        penalization: Penalization::On(PenalizationParams::new(eps).unwrap()),
        record_states: false,
        record_noise: false,
    };
    let seeds = SeedTree::new(305);
    let phi = CylFunctional::of_mode(OuterKind::Sin, 1, 16);
    let times = [0.02, 0.06, 0.15];

    // start far from stationarity: the gap at the last time should have
    // decayed below the first by at least the linear-rate envelope
    let mut x0 = Field::constant(c, 16).unwrap();
    x0.coeffs_mut()[1] = 2.0;
    let curve = ergodic_decay(&x0, &phi, &cfg, &times, 3_000, 3_000, &seeds).unwrap();
    let first = &curve.gaps[0];
    let last = &curve.gaps[2];
    let envelope = first.mean * (-(times[2] - times[0]) * std::f64::consts::PI.powi(4) / 2.0).exp();
    assert!(
        last.mean <= envelope + 4.0 * (last.stderr + first.stderr),
        "gap {} vs envelope {envelope}",
        last.mean
    );

    // constant functional: the gap is identically zero
    let one = CylFunctional::constant_one(16);
    let flat = ergodic_decay(&x0, &one, &cfg, &times, 200, 200, &seeds.child("one")).unwrap();
    for g in &flat.gaps {
        assert_eq!(g.mean, 0.0);
    }
}

#[test]
fn denisov_moments_match_brownian_values() {
    let cfg = chr_core::meander::DenisovConfig {
        n_samples: 25_000,
        m_points: 257,
        alpha: 0.01,
    };
    let report = chr_core::meander::denisov_check(&cfg, &SeedTree::new(310)).unwrap();
    // E[V_tau(1)] = 0 within 3 SE, Var(V_tau(1/2)) = 1/2 within 4 SE
    assert!(report.mean_at_one.mean.abs() <= 3.0 * report.mean_at_one.stderr);
    assert!((report.var_at_half.mean - 0.5).abs() <= 4.0 * report.var_at_half.stderr);
    // the argmin of the glued path follows the split-time law
    assert!(report.argmin_test.p_value > 0.01);
}

#[test]
fn same_seed_runs_coincide_bitwise_and_different_starts_contract() {
    // the executable shadow of pathwise uniqueness: identical noise and
    // start give identical trajectories; identical noise and different
    // starts with equal averages contract in the H norm
    let cfg = SolverConfig {
        n_modes: 16,
        m_points: 65,
        dt: 1e-3,
        horizon: 0.05,
        c: 1.0,
        penalization: Penalization::On(PenalizationParams::new(0.1).unwrap()),
        record_states: true,
        record_noise: false,
    };
    let seeds = SeedTree::new(311);
    let x0 = {
        let mut f = Field::constant(1.0, 16).unwrap();
        f.coeffs_mut()[1] = -0.7;
        f
    };
    let t1 = chr_core::solver::solve_path(&x0, &cfg, &mut seeds.stream("run")).unwrap();
    let t2 = chr_core::solver::solve_path(&x0, &cfg, &mut seeds.stream("run")).unwrap();
    assert_eq!(t1.final_state, t2.final_state);
    assert_eq!(t1.eta_mass_per_step, t2.eta_mass_per_step);

    let y0 = Field::constant(1.0, 16).unwrap();
    let curve =
        chr_core::solver::coupled_contraction(&x0, &y0, &cfg, &mut seeds.stream("pair")).unwrap();
    let d0 = {
        let mut d = x0.clone();
        for (dc, yc) in d.coeffs_mut().iter_mut().zip(y0.coeffs()) {
            *dc -= yc;
        }
        chr_core::spectral::h_inner(&d, &d).sqrt()
    };
    let (t_end, d_end) = *curve.last().unwrap();
    assert!(d_end < d0 * (-t_end * std::f64::consts::PI.powi(4) / 2.0).exp() * 1.02);
}

#[test]
fn antithetic_pairing_preserves_estimator_means() {
    // mirror the driving Gaussians: the law of the centered field is
    // symmetric, so functional means agree within combined SEs
    let grid = GridSpec::new(129).unwrap();
    let n = 40_000;
    let phi = CylFunctional::of_mode(OuterKind::Sin, 1, 8);
    let prep = chr_core::functional::PreparedFunctional::new(&phi, &grid).unwrap();
    let mut scratch = Vec::new();
    let mut plain = RunningStat::default();
    let mut mirrored = RunningStat::default();
    let mut rng = SeedTree::new(306).stream("anti");
    for _ in 0..n {
        let y = sample_mu(&grid, &mut rng);
        plain.push(prep.value(&y.values, &mut scratch));
        let flipped: Vec<f64> = y.values.iter().map(|v| -v).collect();
        mirrored.push(prep.value(&flipped, &mut scratch));
    }
    let diff = (plain.mean() - mirrored.mean()).abs();
    let se = plain.stderr().hypot(mirrored.stderr());
    assert!(diff <= 3.0 * se, "antithetic shift {diff} vs 3 SE {se}");
}

#[test]
fn meander_interior_values_rarely_near_zero_as_grid_refines() {
    // the fraction of interior values below a fixed small threshold shrinks
    // as the grid refines (the a.s.-positive interior in discrete form)
    let mut fractions = Vec::new();
    for (i, m) in [33usize, 129, 513].iter().enumerate() {
        let grid = GridSpec::new(*m).unwrap();
        let mut rng = SeedTree::new(307).indexed("m", i as u64);
        let mut below = 0usize;
        let mut total = 0usize;
        for _ in 0..400 {
            let p = sample_meander(&grid, &mut rng);
            // look near the start, where the meander is smallest
            let k = (m - 1) / 16;
            below += usize::from(p.values[k] < 0.05);
            total += 1;
        }
        fractions.push(below as f64 / total as f64);
    }
    assert!(
        fractions[2] <= fractions[0] + 0.05,
        "fractions {fractions:?}"
    );
}
