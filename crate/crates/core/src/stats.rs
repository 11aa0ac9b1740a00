//! Small statistics toolbox: compensated accumulation, Monte Carlo
//! estimates, covariance with delta-method errors, and Kolmogorov-Smirnov
//! tests.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum. Reductions over replicas must not depend on
/// worker count, so all means are accumulated through this type in a fixed
/// index order.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming mean/variance accumulator (compensated sums of x and x^2 shifted
/// by the first sample to keep cancellation in check).
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStat {
    n: u64,
    shift: f64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.shift = x;
        }
        let d = x - self.shift;
        self.sum.add(d);
        self.sum_sq.add(d * d);
        self.n += 1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.shift + self.sum.value() / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let m = self.sum.value() / n;
        ((self.sum_sq.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        self.sd() / (self.n as f64).sqrt()
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean(),
            stderr: self.stderr(),
            n: self.n,
        }
    }
}

/// A Monte Carlo estimate: the unit of every verification output.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut acc = RunningStat::default();
        for &x in xs {
            acc.push(x);
        }
        acc.estimate()
    }

    /// Difference of two independent estimates; errors combine in quadrature.
    pub fn minus(&self, other: &McEstimate) -> McEstimate {
        McEstimate {
            mean: self.mean - other.mean,
            stderr: self.stderr.hypot(other.stderr),
            n: self.n.min(other.n),
        }
    }

    /// |mean| measured in standard errors.
    pub fn sigmas(&self) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.mean.abs() / self.stderr
        }
    }
}

/// Sample covariance of paired observations with a delta-method standard
/// error: Var(ĉov) ~ E[(X-mX)^2 (Y-mY)^2] - cov^2, over n.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> McEstimate {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut c = CompensatedSum::default();
    let mut m22 = CompensatedSum::default();
    for (&x, &y) in xs.iter().zip(ys) {
        let p = (x - mx) * (y - my);
        c.add(p);
        m22.add(p * p);
    }
    let cov = c.value() / (n - 1.0);
    let var_cov = (m22.value() / n - cov * cov).max(0.0) / n;
    McEstimate {
        mean: cov,
        stderr: var_cov.sqrt(),
        n: xs.len() as u64,
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P(sup_{[0,1]} |B| <= a) for a standard Brownian motion, by the reflection
/// series.
pub fn brownian_sup_abs_cdf(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in -50i64..=50 {
        let k = k as f64;
        let sign = if (k as i64).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * (normal_cdf((2.0 * k + 1.0) * a) - normal_cdf((2.0 * k - 1.0) * a));
    }
    total.clamp(0.0, 1.0)
}

/// Survival function of the Kolmogorov distribution, Q(lambda).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        q += if (k as i64) % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    // Stephens' small-sample correction to the asymptotic distribution.
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    kolmogorov_q(lambda)
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        let diff = (i as f64 / xs.len() as f64 - j as f64 / ys.len() as f64).abs();
        d = d.max(diff);
    }
    let n_eff = (xs.len() * ys.len()) as f64 / (xs.len() + ys.len()) as f64;
    KsResult {
        statistic: d,
        p_value: ks_p(d, n_eff),
        n1: xs.len(),
        n2: ys.len(),
    }
}

/// One-sample Kolmogorov-Smirnov test against a CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    assert!(!samples.is_empty());
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p(d, n),
        n1: xs.len(),
        n2: 0,
    }
}

/// Weighted quantile of (value, weight) pairs; weights need not sum to one.
pub fn weighted_quantile(pairs: &mut [(f64, f64)], q: f64) -> f64 {
    assert!(!pairs.is_empty());
    pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= target {
            return v;
        }
    }
    pairs.last().unwrap().0
}
