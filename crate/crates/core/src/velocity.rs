//! Velocity coefficients of the incompressible flow and the unit-norm
//! constraints on them.
//!
//! `v1 = sum alpha_kl sin(k pi x) cos(l pi y)`, `v2 = sum beta_kl cos(k pi x) sin(l pi y)`
//! with `k, l` in `1..=M`. A stream function `sum c_kl sin(k pi x) sin(l pi y)`
//! produces exactly the pairs with `k alpha_kl + l beta_kl = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on the linkage residual accepted by [`VelocityCoefficients::new`].
pub const LINKAGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoefficients {
    m: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl VelocityCoefficients {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            alpha: vec![0.0; m * m],
            beta: vec![0.0; m * m],
        }
    }

    /// Explicit `(alpha, beta)`; fails if the stream-function linkage is broken.
    pub fn new(m: usize, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        for (what, v) in [("alpha", &alpha), ("beta", &beta)] {
            if v.len() != m * m {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: m * m,
                    got: v.len(),
                });
            }
        }
        let vel = Self { m, alpha, beta };
        for (k, l) in vel.modes() {
            let idx = vel.index(k, l);
            let (a, b) = (vel.alpha[idx], vel.beta[idx]);
            let residual = k as f64 * a + l as f64 * b;
            let scale = 1.0 + (k as f64 * a).abs() + (l as f64 * b).abs();
            if !residual.is_finite() || residual.abs() > LINKAGE_TOL * scale {
                return Err(Error::Linkage { k, l, residual });
            }
        }
        Ok(vel)
    }

    /// `alpha` as given, `beta_kl = -(k/l) alpha_kl`.
    pub fn from_alpha(m: usize, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != m * m {
            return Err(Error::DimensionMismatch {
                what: "alpha",
                expected: m * m,
                got: alpha.len(),
            });
        }
        let mut vel = Self::zeros(m);
        vel.alpha.copy_from_slice(alpha);
        for (k, l) in Self::mode_iter(m) {
            let idx = (k - 1) * m + (l - 1);
            vel.beta[idx] = -(k as f64 / l as f64) * vel.alpha[idx];
        }
        Ok(vel)
    }

    /// Single-mode flow with `alpha_kl = amplitude` and its linked `beta_kl`.
    /// Panics if `(k, l)` lies outside `1..=m`.
    pub fn single(m: usize, k: usize, l: usize, amplitude: f64) -> Self {
        assert!((1..=m).contains(&k) && (1..=m).contains(&l));
        let mut alpha = vec![0.0; m * m];
        alpha[(k - 1) * m + (l - 1)] = amplitude;
        Self::from_alpha(m, &alpha).expect("sized above")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn index(&self, k: usize, l: usize) -> usize {
        (k - 1) * self.m + (l - 1)
    }

    fn mode_iter(m: usize) -> impl Iterator<Item = (usize, usize)> {
        (1..=m).flat_map(move |k| (1..=m).map(move |l| (k, l)))
    }

    /// `(k, l)` pairs in row-major order.
    pub fn modes(&self) -> impl Iterator<Item = (usize, usize)> {
        Self::mode_iter(self.m)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_at(&self, k: usize, l: usize) -> f64 {
        self.alpha[self.index(k, l)]
    }

    pub fn beta_at(&self, k: usize, l: usize) -> f64 {
        self.beta[self.index(k, l)]
    }

    pub fn alpha_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.alpha)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            m: self.m,
            alpha: self.alpha.iter().map(|a| a * c).collect(),
            beta: self.beta.iter().map(|b| b * c).collect(),
        }
    }

    /// `max |k alpha + l beta|` over all modes.
    pub fn linkage_residual(&self) -> f64 {
        self.modes()
            .map(|(k, l)| {
                let idx = self.index(k, l);
                (k as f64 * self.alpha[idx] + l as f64 * self.beta[idx]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `(||v||^2, ||grad v||^2)`.
    pub fn norms(&self) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for (k, l) in self.modes() {
            let idx = self.index(k, l);
            let sq = self.alpha[idx].powi(2) + self.beta[idx].powi(2);
            l2 += sq;
            h1 += (k * k + l * l) as f64 * sq;
        }
        (0.25 * l2, 0.25 * PI * PI * h1)
    }

    /// Reconstructed `(v1, v2)` at a point.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let mut v1 = 0.0;
        let mut v2 = 0.0;
        for (k, l) in self.modes() {
            let idx = self.index(k, l);
            let (kx, ly) = (k as f64 * PI * x, l as f64 * PI * y);
            v1 += self.alpha[idx] * kx.sin() * ly.cos();
            v2 += self.beta[idx] * kx.cos() * ly.sin();
        }
        (v1, v2)
    }
}

/// Which norm of the velocity is held at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `||v||_{L2}^2 = 1`, i.e. `sum (1 + k^2/l^2) alpha^2 = 4`.
    L2Unit,
    /// `||grad v||_{L2}^2 = 1`, i.e. `sum (k^2 + l^2)(1 + k^2/l^2) alpha^2 = 4 / pi^2`.
    H1Unit,
}

impl Constraint {
    /// Diagonal weight on `alpha_kl^2` after eliminating `beta`.
    pub fn metric(self, k: usize, l: usize) -> f64 {
        let (kf, lf) = (k as f64, l as f64);
        let z = 1.0 + kf * kf / (lf * lf);
        match self {
            Constraint::L2Unit => z,
            Constraint::H1Unit => (kf * kf + lf * lf) * z,
        }
    }

    pub fn rhs(self) -> f64 {
        match self {
            Constraint::L2Unit => 4.0,
            Constraint::H1Unit => 4.0 / (PI * PI),
        }
    }

    pub fn metric_diagonal(self, m: usize) -> DVector<f64> {
        DVector::from_iterator(
            m * m,
            (1..=m).flat_map(|k| (1..=m).map(move |l| self.metric(k, l))),
        )
    }

    /// The constrained norm of `vel` (one when feasible).
    pub fn norm(self, vel: &VelocityCoefficients) -> f64 {
        let (l2, h1) = vel.norms();
        match self {
            Constraint::L2Unit => l2,
            Constraint::H1Unit => h1,
        }
    }

    /// `max(linkage residual, |norm - 1|)`.
    pub fn violation(self, vel: &VelocityCoefficients) -> f64 {
        vel.linkage_residual().max((self.norm(vel) - 1.0).abs())
    }

    pub fn is_feasible(self, vel: &VelocityCoefficients, tol: f64) -> bool {
        self.violation(vel) <= tol
    }

    /// Radially rescales a nonzero velocity onto the unit sphere of the norm.
    pub fn project(self, vel: &VelocityCoefficients) -> Option<VelocityCoefficients> {
        let norm = self.norm(vel);
        (norm > 0.0 && norm.is_finite()).then(|| vel.scaled(norm.sqrt().recip()))
    }

    /// Standard-normal `alpha`, linked `beta`, radially rescaled.
    pub fn random_feasible<R: Rng + ?Sized>(self, m: usize, rng: &mut R) -> VelocityCoefficients {
        loop {
            let alpha: Vec<f64> = (0..m * m).map(|_| rng.sample(StandardNormal)).collect();
            let vel = VelocityCoefficients::from_alpha(m, &alpha).expect("sized above");
            if let Some(p) = self.project(&vel) {
                return p;
            }
        }
    }

    /// The first basis control `alpha_11` scaled onto the constraint.
    pub fn first_basis_control(self, m: usize) -> VelocityCoefficients {
        let vel = VelocityCoefficients::single(m, 1, 1, 1.0);
        self.project(&vel).expect("nonzero")
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::L2Unit => "l2",
            Constraint::H1Unit => "h1",
        })
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "l2_unit" => Ok(Constraint::L2Unit),
            "h1" | "h1_unit" => Ok(Constraint::H1Unit),
            other => Err(Error::InvalidInput(format!("unknown constraint '{other}'"))),
        }
    }
}
