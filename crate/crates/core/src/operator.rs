//! Galerkin ODE `da/dt = -(A(t) + D) a` and its bilinear Kronecker form.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisKind, ModeSet};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::tensors::CouplingTensors;
use crate::velocity::VelocityCoefficients;

/// `kappa pi^2 (m^2 + n^2)` for every mode.
pub fn diffusion_diagonal(modes: ModeSet, kappa: f64) -> DVector<f64> {
    DVector::from_iterator(
        modes.len(),
        modes
            .iter()
            .map(|(m, n)| kappa * PI * PI * (m * m + n * n) as f64),
    )
}

/// Scale applied to `sum (i A alpha + j B beta)` in row `(m, n)`.
///
/// Projection onto the test function divides by `sigma_m sigma_n`; the
/// cosine basis differentiates to `-sin`, flipping the sign.
pub fn advection_prefactor(basis: BasisKind, m: usize, n: usize) -> f64 {
    let w = basis.mass().weight(m, n);
    match basis {
        BasisKind::SineSine => PI / w,
        BasisKind::CosineCosine => -PI / w,
    }
}

/// The advection matrix `A(t)` for a given velocity, assembled entry by
/// entry from the coupling tensors.
pub fn assemble_advection(tensors: &CouplingTensors, vel: &VelocityCoefficients) -> Result<DMatrix<f64>> {
    if vel.m() != tensors.m() {
        return Err(Error::DimensionMismatch {
            what: "velocity mode count",
            expected: tensors.m(),
            got: vel.m(),
        });
    }
    let modes = tensors.modes();
    let mut mat = DMatrix::zeros(modes.len(), modes.len());
    for (key, e) in tensors.iter() {
        let contrib = key.i as f64 * e.a * vel.alpha_at(key.k, key.l)
            + key.j as f64 * e.b * vel.beta_at(key.k, key.l);
        if contrib != 0.0 {
            let row = modes.index(key.m, key.n);
            let col = modes.index(key.i, key.j);
            mat[(row, col)] += advection_prefactor(modes.basis, key.m, key.n) * contrib;
        }
    }
    Ok(mat)
}

/// Diffusion plus tensor-driven advection for a controllable flow.
#[derive(Debug, Clone)]
pub struct OdeOperator {
    tensors: Arc<CouplingTensors>,
    kappa: f64,
    diffusion: DVector<f64>,
}

impl OdeOperator {
    pub fn new(tensors: Arc<CouplingTensors>, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        let diffusion = diffusion_diagonal(tensors.modes(), kappa);
        Ok(Self {
            tensors,
            kappa,
            diffusion,
        })
    }

    /// Builds tensors for the sine basis and wraps them.
    pub fn sine(n: usize, m: usize, kappa: f64) -> Result<Self> {
        Self::new(Arc::new(CouplingTensors::build(n, m)?), kappa)
    }

    pub fn tensors(&self) -> &Arc<CouplingTensors> {
        &self.tensors
    }

    pub fn modes(&self) -> ModeSet {
        self.tensors.modes()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Peclet number `1 / kappa`.
    pub fn peclet(&self) -> f64 {
        self.kappa.recip()
    }

    pub fn diffusion(&self) -> &DVector<f64> {
        &self.diffusion
    }

    pub fn velocity_modes(&self) -> usize {
        self.tensors.m()
    }

    pub fn advection(&self, vel: &VelocityCoefficients) -> Result<DMatrix<f64>> {
        assemble_advection(&self.tensors, vel)
    }

    fn check_field(&self, a: &SpectralField) -> Result<()> {
        if a.modes() != self.modes() {
            return Err(Error::DimensionMismatch {
                what: "field modes",
                expected: self.modes().len(),
                got: a.modes().len(),
            });
        }
        Ok(())
    }

    /// `-A(t) a - D a`.
    pub fn rhs(&self, vel: &VelocityCoefficients, a: &SpectralField) -> Result<DVector<f64>> {
        self.check_field(a)?;
        let adv = self.advection(vel)?;
        Ok(-(adv * a.coeffs()) - self.diffusion.component_mul(a.coeffs()))
    }

    /// `dQ/dt = 2 a^T Qhat da/dt` along the flow; negative while the
    /// gradient energy decays.
    pub fn decay_rate(&self, vel: &VelocityCoefficients, a: &SpectralField) -> Result<f64> {
        let rhs = self.rhs(vel, a)?;
        let w = SpectralField::gradient_weights(self.modes());
        Ok(2.0 * a.coeffs().component_mul(&w).dot(&rhs))
    }

    /// Gradient of `-dQ/dt` with respect to `alpha` (with `beta` linked),
    /// which is linear in the control: `-dQ/dt = g . alpha + 2 a^T Qhat D a`.
    pub fn control_gradient(&self, a: &SpectralField) -> Result<DVector<f64>> {
        self.check_field(a)?;
        let modes = self.modes();
        let m = self.velocity_modes();
        let w = SpectralField::gradient_weights(modes);
        let coeffs = a.coeffs();
        let mut g = DVector::zeros(m * m);
        for (key, e) in self.tensors.iter() {
            let c = bilinear_coefficient(modes.basis, key.m, key.n, key.k, key.l, key.i, key.j, e.a, e.b);
            if c == 0.0 {
                continue;
            }
            let row = modes.index(key.m, key.n);
            let col = modes.index(key.i, key.j);
            g[(key.k - 1) * m + (key.l - 1)] += 2.0 * w[row] * coeffs[row] * c * coeffs[col];
        }
        Ok(g)
    }

    /// Objective and constraint matrices of the bilinear form.
    pub fn bilinear_form(&self) -> BilinearForm {
        BilinearForm::new(&self.tensors, self.kappa)
    }
}

/// `C^{mn}_{kl,ij}`: coefficient of `alpha_kl a_ij` in row `(m, n)` once
/// `beta_kl = -(k/l) alpha_kl` is substituted.
#[allow(clippy::too_many_arguments)]
fn bilinear_coefficient(
    basis: BasisKind,
    m: usize,
    n: usize,
    k: usize,
    l: usize,
    i: usize,
    j: usize,
    a: f64,
    b: f64,
) -> f64 {
    let inner = i as f64 * a - j as f64 * (k as f64 / l as f64) * b;
    advection_prefactor(basis, m, n) * inner
}

/// `da/dt = -D a - (I (x) alpha^T) R (e (x) a)` with `R = diag{C^{mn}}`.
#[derive(Debug, Clone)]
pub struct BilinearForm {
    modes: ModeSet,
    m: usize,
    /// Objective diagonal `pi^2 sigma_i sigma_j (i^2 + j^2)`.
    pub q_diag: DVector<f64>,
    /// Constraint diagonal `1 + k^2 / l^2`.
    pub z_diag: DVector<f64>,
    pub d_diag: DVector<f64>,
    /// One `M^2 x N'^2` block per row `(m, n)`.
    pub blocks: Vec<DMatrix<f64>>,
}

impl BilinearForm {
    pub fn new(tensors: &CouplingTensors, kappa: f64) -> Self {
        let modes = tensors.modes();
        let m = tensors.m();
        let mut blocks = vec![DMatrix::zeros(m * m, modes.len()); modes.len()];
        for (key, e) in tensors.iter() {
            let c = bilinear_coefficient(modes.basis, key.m, key.n, key.k, key.l, key.i, key.j, e.a, e.b);
            let block = &mut blocks[modes.index(key.m, key.n)];
            block[((key.k - 1) * m + (key.l - 1), modes.index(key.i, key.j))] += c;
        }
        Self {
            modes,
            m,
            q_diag: SpectralField::gradient_weights(modes),
            z_diag: crate::velocity::Constraint::L2Unit.metric_diagonal(m),
            d_diag: diffusion_diagonal(modes, kappa),
            blocks,
        }
    }

    /// `(I (x) alpha^T) R (e (x) a)`.
    pub fn advection_apply(&self, alpha: &DVector<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
        if alpha.len() != self.m * self.m {
            return Err(Error::DimensionMismatch {
                what: "alpha",
                expected: self.m * self.m,
                got: alpha.len(),
            });
        }
        if a.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.modes.len(),
                got: a.len(),
            });
        }
        let rows = self.blocks.len();
        // e (x) a: one copy of the state per block
        let stacked: Vec<&DVector<f64>> = std::iter::repeat_n(a, rows).collect();
        let r_times: Vec<DVector<f64>> = self.blocks.iter().zip(stacked).map(|(c, a)| c * a).collect();
        Ok(DVector::from_iterator(rows, r_times.iter().map(|v| alpha.dot(v))))
    }

    pub fn rhs(&self, alpha: &DVector<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
        let adv = self.advection_apply(alpha, a)?;
        Ok(-self.d_diag.component_mul(a) - adv)
    }

    pub fn objective(&self, a: &DVector<f64>) -> f64 {
        a.component_mul(&self.q_diag).dot(a)
    }

    /// `alpha^T Z alpha`, equal to 4 on the unit-L2 constraint set.
    pub fn constraint_value(&self, alpha: &DVector<f64>) -> f64 {
        alpha.component_mul(&self.z_diag).dot(alpha)
    }
}

/// CSV `row,col,value`, one row per nonzero entry of `mat`.
pub fn write_matrix_csv<W: Write>(mat: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "row,col,value")?;
    for r in 0..mat.nrows() {
        for c in 0..mat.ncols() {
            let v = mat[(r, c)];
            if v != 0.0 {
                writeln!(out, "{r},{c},{}", crate::fmt_float(v))?;
            }
        }
    }
    Ok(())
}

/// CSV `row,col,value` for the diagonal diffusion matrix.
pub fn write_diagonal_csv<W: Write>(diag: &DVector<f64>, mut out: W) -> Result<()> {
    writeln!(out, "row,col,value")?;
    for (r, v) in diag.iter().enumerate() {
        if *v != 0.0 {
            writeln!(out, "{r},{r},{}", crate::fmt_float(*v))?;
        }
    }
    Ok(())
}
