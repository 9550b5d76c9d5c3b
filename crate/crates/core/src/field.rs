//! Truncated spectral representation of the scalar field.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisKind, ModeSet};
use crate::error::{Error, Result};

/// Coefficients `a_mn` of the scalar over a [`ModeSet`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    modes: ModeSet,
    coeffs: DVector<f64>,
}

impl SpectralField {
    pub fn zeros(modes: ModeSet) -> Self {
        Self {
            modes,
            coeffs: DVector::zeros(modes.len()),
        }
    }

    pub fn from_coeffs(modes: ModeSet, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: modes.len(),
                got: coeffs.len(),
            });
        }
        if let Some(bad) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coefficient {:?} is not finite",
                modes.mode(bad)
            )));
        }
        Ok(Self { modes, coeffs })
    }

    /// Unit amplitude in mode `(m, n)`, zero elsewhere.
    pub fn single_mode(modes: ModeSet, m: usize, n: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(modes);
        f.set(m, n, amplitude);
        f
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    pub fn basis(&self) -> BasisKind {
        self.modes.basis
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.coeffs[self.modes.index(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        let idx = self.modes.index(m, n);
        self.coeffs[idx] = value;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            modes: self.modes,
            coeffs: &self.coeffs * c,
        }
    }

    /// `||phi_N||^2 = sum sigma_m sigma_n a_mn^2`.
    pub fn norm2(&self) -> f64 {
        let mass = self.modes.basis.mass();
        self.modes
            .iter()
            .zip(self.coeffs.iter())
            .map(|((m, n), a)| mass.weight(m, n) * a * a)
            .sum()
    }

    /// Diagonal of the gradient-energy quadratic form, `pi^2 sigma_m sigma_n (m^2 + n^2)`.
    ///
    /// For the sine basis this is `(pi^2 / 4)(i^2 + j^2)`.
    pub fn gradient_weights(modes: ModeSet) -> DVector<f64> {
        let mass = modes.basis.mass();
        DVector::from_iterator(
            modes.len(),
            modes
                .iter()
                .map(|(m, n)| PI * PI * mass.weight(m, n) * (m * m + n * n) as f64),
        )
    }

    /// `||grad phi_N||^2` for either basis.
    pub fn gradient_energy(&self) -> f64 {
        Self::gradient_weights(self.modes)
            .iter()
            .zip(self.coeffs.iter())
            .map(|(w, a)| w * a * a)
            .sum()
    }

    /// The objective `Q = (pi^2/4) sum a_ij^2 (i^2 + j^2)`; sine basis only.
    pub fn objective_q(&self) -> Result<f64> {
        match self.basis() {
            BasisKind::SineSine => Ok(self.gradient_energy()),
            BasisKind::CosineCosine => Err(Error::BasisMismatch(
                "objective Q is defined for the sine basis; use gradient_energy".into(),
            )),
        }
    }

    /// Spatial mean `int phi_N dx dy`.
    pub fn mean(&self) -> f64 {
        match self.basis() {
            BasisKind::CosineCosine => self.get(0, 0),
            BasisKind::SineSine => {
                // int_0^1 sin(i pi x) dx = (1 - (-1)^i) / (i pi)
                let s = |i: usize| if i % 2 == 1 { 2.0 / (i as f64 * PI) } else { 0.0 };
                self.modes
                    .iter()
                    .zip(self.coeffs.iter())
                    .map(|((m, n), a)| a * s(m) * s(n))
                    .sum()
            }
        }
    }

    /// `||phi_N - c||^2` over the unit square.
    pub fn variance_about(&self, c: f64) -> f64 {
        self.norm2() - 2.0 * c * self.mean() + c * c
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let b = self.basis();
        self.modes
            .iter()
            .zip(self.coeffs.iter())
            .map(|((m, n), a)| a * b.factor(m, x) * b.factor(n, y))
            .sum()
    }

    /// Samples `phi_N` on a uniform `grid x grid` lattice including the
    /// boundary. Row index is `x`, column index is `y`.
    pub fn reconstruct(&self, grid: usize) -> Result<DMatrix<f64>> {
        if grid < 2 {
            return Err(Error::InvalidInput(format!(
                "grid must have at least 2 points per axis, got {grid}"
            )));
        }
        let b = self.basis();
        let h = 1.0 / (grid - 1) as f64;
        let axis = self.modes.axis();
        // per-axis factor tables: table[(mode, point)]
        let table = DMatrix::from_fn(self.modes.per_axis(), grid, |r, c| {
            b.factor(r + *axis.start(), c as f64 * h)
        });
        let p = self.modes.per_axis();
        let coeffs = DMatrix::from_row_slice(p, p, self.coeffs.as_slice());
        Ok(table.transpose() * coeffs * table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(n: usize) -> ModeSet {
        ModeSet::new(BasisKind::SineSine, n)
    }

    #[test]
    fn objective_examples() {
        let f = SpectralField::single_mode(sine(3), 1, 1, 1.0);
        assert_abs_diff_eq!(f.objective_q().unwrap(), PI * PI / 2.0, epsilon = 1e-15);
        assert_eq!(SpectralField::zeros(sine(3)).objective_q().unwrap(), 0.0);
        let c = SpectralField::zeros(ModeSet::new(BasisKind::CosineCosine, 2));
        assert!(matches!(c.objective_q(), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn reconstruct_center_and_boundary() {
        let f = SpectralField::single_mode(sine(2), 1, 1, 1.0);
        let g = f.reconstruct(3).unwrap();
        assert_abs_diff_eq!(g[(1, 1)], 1.0, epsilon = 1e-15);

        let coeffs = DVector::from_fn(16, |i, _| (i as f64 * 0.37).sin() + 0.2);
        let f = SpectralField::from_coeffs(sine(4), coeffs).unwrap();
        let g = f.reconstruct(17).unwrap();
        for t in 0..17 {
            for v in [g[(0, t)], g[(16, t)], g[(t, 0)], g[(t, 16)]] {
                assert!(v.abs() < 1e-13, "{v}");
            }
        }
        assert!(f.reconstruct(1).is_err());
    }

    #[test]
    fn reconstruct_agrees_with_pointwise_eval() {
        let modes = ModeSet::new(BasisKind::CosineCosine, 3);
        let coeffs = DVector::from_fn(16, |i, _| 1.0 / (1.0 + i as f64));
        let f = SpectralField::from_coeffs(modes, coeffs).unwrap();
        let g = f.reconstruct(5).unwrap();
        assert_abs_diff_eq!(g[(1, 3)], f.eval(0.25, 0.75), epsilon = 1e-13);
    }

    #[test]
    fn parseval_on_fine_grid() {
        let coeffs = DVector::from_fn(9, |i, _| ((i + 1) as f64).sqrt() - 1.5);
        let f = SpectralField::from_coeffs(sine(3), coeffs).unwrap();
        let grid = 128;
        let g = f.reconstruct(grid).unwrap();
        let h = 1.0 / (grid - 1) as f64;
        let w = |i: usize| if i == 0 || i == grid - 1 { 0.5 } else { 1.0 };
        let mut trap = 0.0;
        for r in 0..grid {
            for c in 0..grid {
                trap += w(r) * w(c) * g[(r, c)] * g[(r, c)];
            }
        }
        trap *= h * h;
        let exact = 0.25 * f.coeffs().norm_squared();
        assert_abs_diff_eq!(f.norm2(), exact, epsilon = 1e-14);
        assert!((trap - exact).abs() < 1e-10, "{trap} vs {exact}");
    }

    #[test]
    fn mean_and_variance() {
        let modes = ModeSet::new(BasisKind::CosineCosine, 2);
        let mut f = SpectralField::zeros(modes);
        f.set(0, 0, 0.5);
        f.set(1, 0, 2.0 / PI);
        assert_eq!(f.mean(), 0.5);
        assert_abs_diff_eq!(f.variance_about(0.5), 0.5 * (2.0 / PI).powi(2), epsilon = 1e-15);

        let s = SpectralField::single_mode(sine(2), 1, 1, 1.0);
        assert_abs_diff_eq!(s.mean(), 4.0 / (PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(SpectralField::from_coeffs(sine(2), DVector::zeros(3)).is_err());
        let mut v = DVector::zeros(4);
        v[2] = f64::NAN;
        assert!(SpectralField::from_coeffs(sine(2), v).is_err());
    }
}
