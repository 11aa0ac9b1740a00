//! Cosine spectral basis on `[0, 1]` with Neumann boundary conditions and
//! the diagonal operators built on it.
//!
//! Everything downstream works in the orthonormal basis `e_0 = 1`,
//! `e_n = sqrt(2) cos(n pi theta)`, in which the Neumann Laplacian acts as
//! `A e_n = -(n pi)^2 e_n`. A [`Field`] is a finite coefficient vector in
//! this basis; [`CosineTransform`] moves between coefficients and values on
//! a uniform collocation grid by trapezoid quadrature, which is exact for
//! band-limited fields when the grid is fine enough.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// e_n evaluated at a point of `[0, 1]`.
pub fn cosine_basis_eval(n: usize, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(CoreError::OutOfRange {
            name: "theta",
            value: theta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(basis_value(n, theta))
}

#[inline]
pub(crate) fn basis_value(n: usize, theta: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * (n as f64 * PI * theta).cos()
    }
}

/// Green kernel of the mean-zero inverse Laplacian:
/// `q(t, s) = t ^ s + (t^2 + s^2)/2 - t - s + 1/3`.
pub fn kernel_q(theta: f64, sigma: f64) -> Result<f64> {
    for (name, v) in [("theta", theta), ("sigma", sigma)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CoreError::OutOfRange {
                name,
                value: v,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    Ok(theta.min(sigma) + 0.5 * (theta * theta + sigma * sigma) - theta - sigma + 1.0 / 3.0)
}

/// A function on `[0, 1]` stored as coefficients `a_0..a_N` of the cosine
/// basis. `N >= 1` always.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct Field {
    coeffs: Vec<f64>,
}

/// Wire format: coefficient array plus an explicit mode-count header.
#[derive(Serialize, Deserialize)]
struct FieldRepr {
    n_modes: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<FieldRepr> for Field {
    type Error = String;
    fn try_from(r: FieldRepr) -> std::result::Result<Self, String> {
        if r.coeffs.len() != r.n_modes + 1 {
            return Err(format!(
                "n_modes = {} inconsistent with {} coefficients",
                r.n_modes,
                r.coeffs.len()
            ));
        }
        Field::new(r.coeffs).map_err(|e| e.to_string())
    }
}

impl From<Field> for FieldRepr {
    fn from(f: Field) -> Self {
        FieldRepr {
            n_modes: f.n_modes(),
            coeffs: f.coeffs,
        }
    }
}

impl Field {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(CoreError::FieldTooSmall(coeffs.len()));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(n_modes: usize) -> Result<Self> {
        Self::new(vec![0.0; n_modes + 1])
    }

    /// The basis element e_n as a Field with `n_modes` modes.
    pub fn basis(n: usize, n_modes: usize) -> Result<Self> {
        let mut f = Self::zeros(n_modes)?;
        if n > n_modes {
            return Err(CoreError::SizeMismatch {
                left: n,
                right: n_modes,
                context: "basis index beyond mode count",
            });
        }
        f.coeffs[n] = 1.0;
        Ok(f)
    }

    pub fn constant(c: f64, n_modes: usize) -> Result<Self> {
        let mut f = Self::zeros(n_modes)?;
        f.coeffs[0] = c;
        Ok(f)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// The average equals the 0-mode coefficient exactly.
    pub fn average(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Pointwise synthesis at one point (slow path; use [`CosineTransform`]
    /// for whole grids).
    pub fn eval(&self, theta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, &a)| a * basis_value(n, theta))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn h_norm(&self) -> f64 {
        h_inner(self, self).sqrt()
    }

    /// `H^{-gamma}` norm with the explicit weights `(1+n)^{-2 gamma}`.
    pub fn hgamma_norm(&self, gamma: f64) -> Result<f64> {
        if gamma <= 0.0 {
            return Err(CoreError::OutOfRange {
                name: "gamma",
                value: gamma,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, &a)| (1.0 + n as f64).powf(-2.0 * gamma) * a * a)
            .sum::<f64>()
            .sqrt())
    }
}

/// `A = d^2/d theta^2` with Neumann conditions: mode n is multiplied by
/// `-(n pi)^2`, the constant mode is annihilated.
pub fn apply_a(f: &Field) -> Field {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, &a)| {
            let npi = n as f64 * PI;
            -npi * npi * a
        })
        .collect();
    Field { coeffs }
}

/// The extended inverse `Qbar`: identity on the constant mode, `1/(n pi)^2`
/// on mode n >= 1.
pub fn apply_qbar(f: &Field) -> Field {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, &a)| {
            if n == 0 {
                a
            } else {
                let npi = n as f64 * PI;
                a / (npi * npi)
            }
        })
        .collect();
    Field { coeffs }
}

/// Projector onto mean zero: kills the constant mode.
pub fn project_pi(f: &Field) -> Field {
    let mut g = f.clone();
    g.coeffs[0] = 0.0;
    g
}

/// L^2 inner product, exact in coefficients (orthonormal basis). Shorter
/// fields are zero-padded.
pub fn l2_inner(f: &Field, g: &Field) -> f64 {
    f.coeffs
        .iter()
        .zip(g.coeffs.iter())
        .map(|(a, b)| a * b)
        .sum()
}

/// Inner product of the distribution space H: `(f, g)_H = <Qbar f, g>_L`,
/// i.e. weights 1 on the mean and `1/(n pi)^2` on mode n.
pub fn h_inner(f: &Field, g: &Field) -> f64 {
    f.coeffs
        .iter()
        .zip(g.coeffs.iter())
        .enumerate()
        .map(|(n, (a, b))| {
            if n == 0 {
                a * b
            } else {
                let npi = n as f64 * PI;
                a * b / (npi * npi)
            }
        })
        .sum()
}

/// Uniform grid on `[0, 1]` including both endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    m_points: usize,
}

impl GridSpec {
    pub fn new(m_points: usize) -> Result<Self> {
        if m_points < 2 {
            return Err(CoreError::GridTooSmall(m_points));
        }
        Ok(Self { m_points })
    }

    pub fn m_points(&self) -> usize {
        self.m_points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m_points - 1) as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m_points).map(|i| self.theta(i)).collect()
    }

    /// Index of the grid point closest to theta.
    pub fn nearest_index(&self, theta: f64) -> usize {
        ((theta / self.spacing()).round() as usize).min(self.m_points - 1)
    }

    /// Trapezoid weights (half weight at the endpoints).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.m_points];
        w[0] = 0.5 * h;
        w[self.m_points - 1] = 0.5 * h;
        w
    }

    /// Default collocation grid for a given mode count: m = 4N + 1.
    pub fn for_modes(n_modes: usize) -> Self {
        Self {
            m_points: 4 * n_modes + 1,
        }
    }
}

/// Trapezoid integral of grid values over `[0, 1]`.
pub fn trapezoid(values: &[f64], grid: &GridSpec) -> f64 {
    debug_assert_eq!(values.len(), grid.m_points());
    let h = grid.spacing();
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    h * (interior + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Cached synthesis/analysis plan between `n_modes` coefficients and a
/// collocation grid. Analysis is trapezoid quadrature against the basis,
/// exact for band-limited inputs when `m_points > 2 n_modes`.
#[derive(Clone, Debug)]
pub struct CosineTransform {
    grid: GridSpec,
    n_modes: usize,
    /// Row-major m x (N+1) table of e_n(theta_i).
    basis: Vec<f64>,
    quad_w: Vec<f64>,
}

impl CosineTransform {
    pub fn new(grid: GridSpec, n_modes: usize) -> Result<Self> {
        if n_modes < 1 {
            return Err(CoreError::FieldTooSmall(n_modes + 1));
        }
        if grid.m_points() < 2 * n_modes {
            return Err(CoreError::Aliasing {
                m_points: grid.m_points(),
                n_modes,
            });
        }
        let m = grid.m_points();
        let mut basis = vec![0.0; m * (n_modes + 1)];
        for i in 0..m {
            let theta = grid.theta(i);
            for n in 0..=n_modes {
                basis[i * (n_modes + 1) + n] = basis_value(n, theta);
            }
        }
        Ok(Self {
            grid,
            n_modes,
            basis,
            quad_w: grid.trapezoid_weights(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn synthesize_into(&self, f: &Field, out: &mut Vec<f64>) {
        let m = self.grid.m_points();
        let k = self.n_modes + 1;
        out.clear();
        out.reserve(m);
        let nc = f.coeffs.len().min(k);
        for i in 0..m {
            let row = &self.basis[i * k..i * k + nc];
            let mut acc = 0.0;
            for (b, a) in row.iter().zip(&f.coeffs[..nc]) {
                acc += b * a;
            }
            out.push(acc);
        }
    }

    pub fn synthesize(&self, f: &Field) -> Vec<f64> {
        let mut out = Vec::new();
        self.synthesize_into(f, &mut out);
        out
    }

    pub fn analyze_into(&self, values: &[f64], out: &mut Field) {
        debug_assert_eq!(values.len(), self.grid.m_points());
        let k = self.n_modes + 1;
        out.coeffs.clear();
        out.coeffs.resize(k, 0.0);
        for (i, (&v, &w)) in values.iter().zip(&self.quad_w).enumerate() {
            let vw = v * w;
            let row = &self.basis[i * k..(i + 1) * k];
            for (c, b) in out.coeffs.iter_mut().zip(row) {
                *c += vw * b;
            }
        }
    }

    pub fn analyze(&self, values: &[f64]) -> Field {
        let mut f = Field {
            coeffs: vec![0.0; self.n_modes + 1],
        };
        self.analyze_into(values, &mut f);
        f
    }
}

/// One-shot synthesis on a grid.
pub fn to_values(f: &Field, grid: &GridSpec) -> Result<Vec<f64>> {
    Ok(CosineTransform::new(*grid, f.n_modes())?.synthesize(f))
}

/// One-shot analysis of grid values into `n_modes` coefficients. Rejects
/// grids too coarse for the requested mode count.
pub fn to_coeffs(values: &[f64], grid: &GridSpec, n_modes: usize) -> Result<Field> {
    if values.len() != grid.m_points() {
        return Err(CoreError::SizeMismatch {
            left: values.len(),
            right: grid.m_points(),
            context: "values vs grid",
        });
    }
    Ok(CosineTransform::new(*grid, n_modes)?.analyze(values))
}
