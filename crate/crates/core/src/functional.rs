//! Cylindrical test functionals `Phi(x) = prod_j phi_j(<x, g_j>_L)` with
//! smooth bounded-derivative outer profiles, plus the pointwise functionals
//! used on half-interval paths.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spectral::{l2_inner, CosineTransform, Field, GridSpec};

/// Outer profile applied to one coordinate `<x, g>_L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OuterKind {
    One,
    Identity,
    Sin,
    Cos,
    /// `exp(-v^2 / 2)`.
    GaussBump,
}

impl OuterKind {
    pub fn value(&self, v: f64) -> f64 {
        match self {
            OuterKind::One => 1.0,
            OuterKind::Identity => v,
            OuterKind::Sin => v.sin(),
            OuterKind::Cos => v.cos(),
            OuterKind::GaussBump => (-0.5 * v * v).exp(),
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            OuterKind::One => 0.0,
            OuterKind::Identity => 1.0,
            OuterKind::Sin => v.cos(),
            OuterKind::Cos => -v.sin(),
            OuterKind::GaussBump => -v * (-0.5 * v * v).exp(),
        }
    }
}

/// `Phi(x) = prod_j phi_j(<x, g_j>_L)`; the directional derivative along a
/// field h is available in closed form through the chain rule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CylFunctional {
    pub dirs: Vec<Field>,
    pub outers: Vec<OuterKind>,
}

impl CylFunctional {
    pub fn new(dirs: Vec<Field>, outers: Vec<OuterKind>) -> Result<Self> {
        if dirs.len() != outers.len() || dirs.is_empty() {
            return Err(CoreError::SizeMismatch {
                left: dirs.len(),
                right: outers.len(),
                context: "functional directions vs outer profiles",
            });
        }
        Ok(Self { dirs, outers })
    }

    pub fn constant_one(n_modes: usize) -> Self {
        Self {
            dirs: vec![Field::basis(0, n_modes).unwrap()],
            outers: vec![OuterKind::One],
        }
    }

    /// `Phi(x) = mean(x)`.
    pub fn mean(n_modes: usize) -> Self {
        Self {
            dirs: vec![Field::basis(0, n_modes).unwrap()],
            outers: vec![OuterKind::Identity],
        }
    }

    /// `Phi(x) = outer(<x, e_n>_L)`.
    pub fn of_mode(outer: OuterKind, n: usize, n_modes: usize) -> Self {
        Self {
            dirs: vec![Field::basis(n, n_modes).unwrap()],
            outers: vec![outer],
        }
    }

    fn product_and_partials(&self, coords: &[f64]) -> (f64, Vec<f64>) {
        let vals: Vec<f64> = coords
            .iter()
            .zip(&self.outers)
            .map(|(&v, o)| o.value(v))
            .collect();
        let total: f64 = vals.iter().product();
        let partials = coords
            .iter()
            .zip(&self.outers)
            .enumerate()
            .map(|(j, (&v, o))| {
                let mut p = o.derivative(v);
                for (k, &w) in vals.iter().enumerate() {
                    if k != j {
                        p *= w;
                    }
                }
                p
            })
            .collect();
        (total, partials)
    }

    pub fn value_coords(&self, coords: &[f64]) -> f64 {
        self.product_and_partials(coords).0
    }

    /// Value at a spectral state, coordinates by exact coefficient dot.
    pub fn value_field(&self, x: &Field) -> f64 {
        let coords: Vec<f64> = self.dirs.iter().map(|g| l2_inner(x, g)).collect();
        self.value_coords(&coords)
    }

    /// Closed-form directional derivative at a state given its coordinates.
    pub fn directional_derivative_coords(&self, coords: &[f64], h: &Field) -> f64 {
        let (_, partials) = self.product_and_partials(coords);
        partials
            .iter()
            .zip(&self.dirs)
            .map(|(p, g)| p * l2_inner(h, g))
            .sum()
    }

    pub fn directional_derivative_field(&self, x: &Field, h: &Field) -> f64 {
        let coords: Vec<f64> = self.dirs.iter().map(|g| l2_inner(x, g)).collect();
        self.directional_derivative_coords(&coords, h)
    }
}

/// Grid-side evaluator: direction values pre-multiplied by quadrature
/// weights so each sample costs one dot product per direction.
#[derive(Clone, Debug)]
pub struct PreparedFunctional {
    functional: CylFunctional,
    weighted_dirs: Vec<Vec<f64>>,
}

impl PreparedFunctional {
    pub fn new(functional: &CylFunctional, grid: &GridSpec) -> Result<Self> {
        let w = grid.trapezoid_weights();
        let weighted_dirs = functional
            .dirs
            .iter()
            .map(|g| {
                let tr = CosineTransform::new(*grid, g.n_modes())?;
                let mut vals = tr.synthesize(g);
                for (v, wi) in vals.iter_mut().zip(&w) {
                    *v *= wi;
                }
                Ok(vals)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            functional: functional.clone(),
            weighted_dirs,
        })
    }

    pub fn coords(&self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for wd in &self.weighted_dirs {
            out.push(wd.iter().zip(values).map(|(a, b)| a * b).sum());
        }
    }

    pub fn value(&self, values: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.coords(values, scratch);
        self.functional.value_coords(scratch)
    }

    pub fn directional_derivative(&self, values: &[f64], h: &Field, scratch: &mut Vec<f64>) -> f64 {
        self.coords(values, scratch);
        self.functional.directional_derivative_coords(scratch, h)
    }
}

/// Functionals of a path restricted to `[0, 1/2]`, with the derivative along
/// the constant shift `1` on that interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum HalfPathFunctional {
    One,
    /// `sin(omega(theta))`.
    SinAt(f64),
    /// `cos(omega(theta))`.
    CosAt(f64),
    /// `omega(theta)`.
    ValueAt(f64),
}

impl HalfPathFunctional {
    fn index(theta: f64, half_points: usize) -> usize {
        let h = 0.5 / (half_points - 1) as f64;
        ((theta / h).round() as usize).min(half_points - 1)
    }

    pub fn value(&self, half_values: &[f64]) -> f64 {
        match *self {
            HalfPathFunctional::One => 1.0,
            HalfPathFunctional::SinAt(t) => half_values[Self::index(t, half_values.len())].sin(),
            HalfPathFunctional::CosAt(t) => half_values[Self::index(t, half_values.len())].cos(),
            HalfPathFunctional::ValueAt(t) => half_values[Self::index(t, half_values.len())],
        }
    }

    /// Derivative along the constant function 1 on `[0, 1/2]`.
    pub fn shift_derivative(&self, half_values: &[f64]) -> f64 {
        match *self {
            HalfPathFunctional::One => 0.0,
            HalfPathFunctional::SinAt(t) => half_values[Self::index(t, half_values.len())].cos(),
            HalfPathFunctional::CosAt(t) => -half_values[Self::index(t, half_values.len())].sin(),
            HalfPathFunctional::ValueAt(_) => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use crate::spectral::to_values;
    use rand::Rng;

    fn random_field(n_modes: usize, seed: u64) -> Field {
        let mut rng = SeedTree::new(seed).stream("f");
        Field::new((0..=n_modes).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
    }

    #[test]
    fn linear_functional_derivative_is_constant() {
        // Phi(x) = <x, g>_L: the derivative along h is <h, g>_L, independent of x.
        let g = random_field(6, 1);
        let phi = CylFunctional::new(vec![g.clone()], vec![OuterKind::Identity]).unwrap();
        let h = random_field(6, 2);
        let x1 = random_field(6, 3);
        let x2 = random_field(6, 4);
        let d1 = phi.directional_derivative_field(&x1, &h);
        let d2 = phi.directional_derivative_field(&x2, &h);
        assert!((d1 - d2).abs() < 1e-14);
        assert!((d1 - l2_inner(&h, &g)).abs() < 1e-14);
    }

    #[test]
    fn sin_mode_chain_rule() {
        let n = 8;
        let phi = CylFunctional::of_mode(OuterKind::Sin, 1, n);
        let e1 = Field::basis(1, n).unwrap();
        let x = random_field(n, 5);
        let v = l2_inner(&x, &e1);
        let d = phi.directional_derivative_field(&x, &e1);
        assert!((d - v.cos()).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_central_differences() {
        let n = 10;
        let phis = [
            CylFunctional::of_mode(OuterKind::Sin, 1, n),
            CylFunctional::of_mode(OuterKind::GaussBump, 2, n),
            CylFunctional::new(
                vec![Field::basis(1, n).unwrap(), Field::basis(3, n).unwrap()],
                vec![OuterKind::Cos, OuterKind::Sin],
            )
            .unwrap(),
        ];
        for (k, phi) in phis.iter().enumerate() {
            let x = random_field(n, 10 + k as u64);
            let h = random_field(n, 20 + k as u64);
            let t = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            for j in 0..=n {
                xp.coeffs_mut()[j] += t * h.coeff(j);
                xm.coeffs_mut()[j] -= t * h.coeff(j);
            }
            let fd = (phi.value_field(&xp) - phi.value_field(&xm)) / (2.0 * t);
            let cf = phi.directional_derivative_field(&x, &h);
            assert!((fd - cf).abs() < 1e-8, "functional {k}: {fd} vs {cf}");
        }
    }

    #[test]
    fn prepared_grid_evaluation_matches_spectral() {
        let n = 8;
        let grid = GridSpec::for_modes(n);
        let phi = CylFunctional::of_mode(OuterKind::Sin, 2, n);
        let prep = PreparedFunctional::new(&phi, &grid).unwrap();
        let x = random_field(n, 30);
        let vals = to_values(&x, &grid).unwrap();
        let mut scratch = Vec::new();
        let on_grid = prep.value(&vals, &mut scratch);
        let spectral = phi.value_field(&x);
        assert!((on_grid - spectral).abs() < 1e-10);
    }

    #[test]
    fn half_path_functionals() {
        let half = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let psi = HalfPathFunctional::SinAt(0.25);
        assert!((psi.value(&half) - 1.0f64.sin()).abs() < 1e-15);
        assert!((psi.shift_derivative(&half) - 1.0f64.cos()).abs() < 1e-15);
        assert_eq!(HalfPathFunctional::One.shift_derivative(&half), 0.0);
    }
}
