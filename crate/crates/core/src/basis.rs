//! Trigonometric bases on the unit square and their mode orderings.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Product basis used for the scalar field.
///
/// `SineSine` is `sin(m pi x) sin(n pi y)` with `m, n >= 1` and vanishes on the
/// boundary. `CosineCosine` is `cos(m pi x) cos(n pi y)` with `m, n >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    SineSine,
    CosineCosine,
}

impl BasisKind {
    pub fn first_mode(self) -> usize {
        match self {
            BasisKind::SineSine => 1,
            BasisKind::CosineCosine => 0,
        }
    }

    /// Value of the 1-D basis factor at `x`.
    pub fn factor(self, mode: usize, x: f64) -> f64 {
        let arg = mode as f64 * std::f64::consts::PI * x;
        match self {
            BasisKind::SineSine => arg.sin(),
            BasisKind::CosineCosine => arg.cos(),
        }
    }

    /// `d/dx` of the 1-D basis factor.
    pub fn factor_derivative(self, mode: usize, x: f64) -> f64 {
        let k = mode as f64 * std::f64::consts::PI;
        match self {
            BasisKind::SineSine => k * (k * x).cos(),
            BasisKind::CosineCosine => -k * (k * x).sin(),
        }
    }

    pub fn mass(self) -> MassWeights {
        MassWeights { basis: self }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::SineSine => "sine",
            BasisKind::CosineCosine => "cosine",
        })
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sine" | "sin" | "sine_sine" => Ok(BasisKind::SineSine),
            "cosine" | "cos" | "cosine_cosine" => Ok(BasisKind::CosineCosine),
            other => Err(Error::InvalidInput(format!("unknown basis '{other}'"))),
        }
    }
}

/// `sigma_m = int_0^1 f_m(x)^2 dx` for the basis factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MassWeights {
    basis: BasisKind,
}

impl MassWeights {
    pub fn sigma(&self, mode: usize) -> f64 {
        match (self.basis, mode) {
            (BasisKind::CosineCosine, 0) => 1.0,
            // sin(0) is identically zero; the sine basis never contains mode 0.
            (BasisKind::SineSine, 0) => 0.0,
            _ => 0.5,
        }
    }

    /// `sigma_m * sigma_n`, the squared L2 norm of the 2-D basis function.
    pub fn weight(&self, m: usize, n: usize) -> f64 {
        self.sigma(m) * self.sigma(n)
    }
}

/// The set of 2-D modes `(m, n)` kept in a truncation, in row-major order
/// (`m` outer, `n` inner).
///
/// For the sine basis `m, n` run over `1..=n_max`; for the cosine basis over
/// `0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSet {
    pub basis: BasisKind,
    pub n_max: usize,
}

impl ModeSet {
    pub fn new(basis: BasisKind, n_max: usize) -> Self {
        Self { basis, n_max }
    }

    pub fn per_axis(&self) -> usize {
        self.n_max + 1 - self.basis.first_mode()
    }

    pub fn len(&self) -> usize {
        self.per_axis() * self.per_axis()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, m: usize, n: usize) -> bool {
        let lo = self.basis.first_mode();
        (lo..=self.n_max).contains(&m) && (lo..=self.n_max).contains(&n)
    }

    /// Flat index of mode `(m, n)`. Panics if the mode is outside the set.
    pub fn index(&self, m: usize, n: usize) -> usize {
        assert!(self.contains(m, n), "mode ({m},{n}) outside {self:?}");
        let lo = self.basis.first_mode();
        (m - lo) * self.per_axis() + (n - lo)
    }

    pub fn mode(&self, idx: usize) -> (usize, usize) {
        let lo = self.basis.first_mode();
        (idx / self.per_axis() + lo, idx % self.per_axis() + lo)
    }

    pub fn axis(&self) -> std::ops::RangeInclusive<usize> {
        self.basis.first_mode()..=self.n_max
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }
}
