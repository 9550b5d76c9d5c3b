//! The two reference flows and initial-condition projection.
//!
//! * Fixed shear `v = (sin 2 pi y, 0)` on the sine basis.
//! * Switching flow on the cosine basis: for `t mod 1 < 0.75`
//!   `v = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y))`, otherwise
//!   `v = (-sin(2 pi x) cos(pi y), 2 cos(2 pi x) sin(pi y))`, with a
//!   half-domain step as initial data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisKind, ModeSet};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrals::{integral_sin_cos, integral_sin_sin2_sin, UnitQuadrature};
use crate::simulator::{AdvectionSchedule, LinearSystem};
use crate::velocity::VelocityCoefficients;

/// Switching period and the offset of the second phase within it.
pub const SWITCH_PERIOD: f64 = 1.0;
pub const SWITCH_OFFSET: f64 = 0.75;

/// Diffusion plus a fixed, precomputed advection matrix.
#[derive(Debug, Clone)]
pub struct PrescribedOperator {
    pub modes: ModeSet,
    pub kappa: f64,
    pub advection: DMatrix<f64>,
}

impl PrescribedOperator {
    pub fn system(&self) -> LinearSystem {
        LinearSystem::new(self.modes, self.kappa, AdvectionSchedule::Constant(self.advection.clone()))
    }
}

/// Sine-basis operator for `v = (sin 2 pi y, 0)`.
///
/// Row `(k, l)`, column `(m, n)`: `m pi / (sigma_k sigma_l) * int sin(k) cos(m) dx * int sin(l) sin(2) sin(n) dy`.
pub fn build_fixed_flow_operator(n: usize, kappa: f64) -> Result<PrescribedOperator> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let modes = ModeSet::new(BasisKind::SineSine, n);
    let mass = modes.basis.mass();
    let mut adv = DMatrix::zeros(modes.len(), modes.len());
    for (row, (k, l)) in modes.iter().enumerate() {
        for (col, (m, nn)) in modes.iter().enumerate() {
            let x = integral_sin_cos(k, m);
            let y = integral_sin_sin2_sin(l, nn);
            adv[(row, col)] = m as f64 * PI / mass.weight(k, l) * x * y;
        }
    }
    Ok(PrescribedOperator {
        modes,
        kappa,
        advection: adv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchPhase {
    Part1,
    Part2,
}

impl SwitchPhase {
    /// Frequency of the x-factor of the velocity: 1 in the first phase, 2 in the second.
    fn p(self) -> i64 {
        match self {
            SwitchPhase::Part1 => 1,
            SwitchPhase::Part2 => 2,
        }
    }

    /// The phase velocity in coefficient form.
    pub fn velocity(self, m: usize) -> Result<VelocityCoefficients> {
        let need = self.p() as usize;
        if m < need {
            return Err(Error::InvalidInput(format!(
                "switching phase {self:?} needs at least {need} velocity modes"
            )));
        }
        let mut alpha = vec![0.0; m * m];
        let mut beta = vec![0.0; m * m];
        let idx = (need - 1) * m;
        match self {
            SwitchPhase::Part1 => {
                alpha[idx] = 1.0;
                beta[idx] = -1.0;
            }
            SwitchPhase::Part2 => {
                alpha[idx] = -1.0;
                beta[idx] = 2.0;
            }
        }
        VelocityCoefficients::new(m, alpha, beta)
    }
}

/// `int cos(m pi x) sin(p pi x) sin(i pi x) dx` from the piecewise table.
pub fn table_a(phase: SwitchPhase, m: usize, i: usize) -> f64 {
    let p = phase.p();
    let (m, i) = (m as i64, i as i64);
    if m == 0 {
        return if i == p { 0.5 } else { 0.0 };
    }
    let mut v = 0.0;
    if i == m + p {
        v += 0.25;
    }
    if i == m - p && i > 0 {
        v -= 0.25;
    }
    if i == p - m && i > 0 {
        v += 0.25;
    }
    v
}

/// `int cos(n pi y) cos(pi y) cos(j pi y) dy` (identical in both phases).
pub fn table_b(_phase: SwitchPhase, n: usize, j: usize) -> f64 {
    cos_cos_cos_table(1, n, j)
}

/// `int cos(m pi x) cos(p pi x) cos(i pi x) dx`.
pub fn table_c(phase: SwitchPhase, m: usize, i: usize) -> f64 {
    cos_cos_cos_table(phase.p(), m, i)
}

/// `int cos(n pi y) sin(pi y) sin(j pi y) dy` (identical in both phases).
pub fn table_d(_phase: SwitchPhase, n: usize, j: usize) -> f64 {
    table_a(SwitchPhase::Part1, n, j)
}

fn cos_cos_cos_table(p: i64, m: usize, i: usize) -> f64 {
    let (m, i) = (m as i64, i as i64);
    if m == 0 {
        return if i == p { 0.5 } else { 0.0 };
    }
    let mut v = 0.0;
    for hit in [m + p, m - p, p - m] {
        if i == hit && i > 0 {
            v += 0.25;
        }
    }
    if i == 0 && m == p {
        v += 0.5;
    }
    v
}

/// Cosine-basis advection matrix of one switching phase, built from the tables.
pub fn switching_advection(n: usize, phase: SwitchPhase) -> DMatrix<f64> {
    let modes = ModeSet::new(BasisKind::CosineCosine, n);
    let mass = modes.basis.mass();
    let mut adv = DMatrix::zeros(modes.len(), modes.len());
    for (row, (m, nn)) in modes.iter().enumerate() {
        let scale = PI / mass.weight(m, nn);
        for (col, (i, j)) in modes.iter().enumerate() {
            let (fi, fj) = (i as f64, j as f64);
            let bracket = match phase {
                SwitchPhase::Part1 => {
                    -fi * table_a(phase, m, i) * table_b(phase, nn, j)
                        + fj * table_c(phase, m, i) * table_d(phase, nn, j)
                }
                SwitchPhase::Part2 => {
                    fi * table_a(phase, m, i) * table_b(phase, nn, j)
                        - 2.0 * fj * table_c(phase, m, i) * table_d(phase, nn, j)
                }
            };
            adv[(row, col)] = scale * bracket;
        }
    }
    adv
}

pub fn build_switching_flow_operator(n: usize, kappa: f64, phase: SwitchPhase) -> Result<PrescribedOperator> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    Ok(PrescribedOperator {
        modes: ModeSet::new(BasisKind::CosineCosine, n),
        kappa,
        advection: switching_advection(n, phase),
    })
}

/// The periodic two-phase system.
pub fn switching_system(n: usize, kappa: f64) -> Result<LinearSystem> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let modes = ModeSet::new(BasisKind::CosineCosine, n);
    let schedule = AdvectionSchedule::Periodic {
        period: SWITCH_PERIOD,
        offsets: vec![0.0, SWITCH_OFFSET],
        mats: vec![
            switching_advection(n, SwitchPhase::Part1),
            switching_advection(n, SwitchPhase::Part2),
        ],
    };
    Ok(LinearSystem::new(modes, kappa, schedule))
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InitialCondition {
    /// Explicit `((m, n), a_mn)` pairs; other modes are zero.
    Modes(Vec<((usize, usize), f64)>),
    /// 1 on `x <= 1/2`, 0 elsewhere. Cosine basis only.
    Step,
    /// Galerkin projection of a function using tensor Gauss-Legendre quadrature.
    Projected(ScalarFn),
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Modes(m) => f.debug_tuple("Modes").field(m).finish(),
            InitialCondition::Step => f.write_str("Step"),
            InitialCondition::Projected(_) => f.write_str("Projected(..)"),
        }
    }
}

/// Points per axis used for [`InitialCondition::Projected`].
pub const PROJECTION_POINTS: usize = 64;

pub fn project_initial(ic: &InitialCondition, modes: ModeSet) -> Result<SpectralField> {
    let mut field = SpectralField::zeros(modes);
    match ic {
        InitialCondition::Modes(list) => {
            for &((m, n), v) in list {
                if !modes.contains(m, n) {
                    return Err(Error::InvalidInput(format!(
                        "mode ({m},{n}) is outside the {} basis with N={}",
                        modes.basis, modes.n_max
                    )));
                }
                field.set(m, n, v);
            }
        }
        InitialCondition::Step => {
            if modes.basis != BasisKind::CosineCosine {
                return Err(Error::BasisMismatch(
                    "the step initial condition is defined for the cosine basis".into(),
                ));
            }
            field.set(0, 0, 0.5);
            for m in (1..=modes.n_max).filter(|m| m % 2 == 1) {
                let v = 2.0 / (m as f64 * PI);
                field.set(m, 0, if m % 4 == 1 { v } else { -v });
            }
        }
        InitialCondition::Projected(f) => {
            let nodes = UnitQuadrature::new(PROJECTION_POINTS).nodes_weights();
            let basis = modes.basis;
            let mass = basis.mass();
            let axis: Vec<usize> = modes.axis().collect();
            // factor tables at the nodes
            let table: Vec<Vec<f64>> = axis
                .iter()
                .map(|&m| nodes.iter().map(|&(x, _)| basis.factor(m, x)).collect())
                .collect();
            let samples: Vec<Vec<f64>> = nodes
                .iter()
                .map(|&(x, wx)| nodes.iter().map(|&(y, wy)| wx * wy * f(x, y)).collect())
                .collect();
            let mut coeffs = DVector::zeros(modes.len());
            for (idx, (m, n)) in modes.iter().enumerate() {
                let tm = &table[m - axis[0]];
                let tn = &table[n - axis[0]];
                let mut s = 0.0;
                for (p, row) in samples.iter().enumerate() {
                    let inner: f64 = row.iter().zip(tn).map(|(v, t)| v * t).sum();
                    s += tm[p] * inner;
                }
                coeffs[idx] = s / mass.weight(m, n);
            }
            field = SpectralField::from_coeffs(modes, coeffs)?;
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{integral_triple, TrigFactor};
    use crate::operator::assemble_advection;
    use crate::tensors::CouplingTensors;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_coefficients() {
        let modes = ModeSet::new(BasisKind::CosineCosine, 8);
        let a = project_initial(&InitialCondition::Step, modes).unwrap();
        assert_eq!(a.get(0, 0), 0.5);
        assert_abs_diff_eq!(a.get(1, 0), 2.0 / PI, epsilon = 1e-16);
        assert_eq!(a.get(2, 0), 0.0);
        assert_abs_diff_eq!(a.get(3, 0), -2.0 / (3.0 * PI), epsilon = 1e-16);
        assert_abs_diff_eq!(a.get(5, 0), 2.0 / (5.0 * PI), epsilon = 1e-16);
        assert_eq!(a.get(1, 1), 0.0);
        let sine = ModeSet::new(BasisKind::SineSine, 4);
        assert!(matches!(project_initial(&InitialCondition::Step, sine), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn step_matches_half_domain_integrals() {
        let modes = ModeSet::new(BasisKind::CosineCosine, 9);
        let a = project_initial(&InitialCondition::Step, modes).unwrap();
        let quad = UnitQuadrature::new(64);
        for m in 0..=9 {
            // (1/sigma_m) int_0^{1/2} cos(m pi x) dx, by quadrature on [0, 1/2]
            let half = 0.5 * quad.integrate(|s| (m as f64 * PI * 0.5 * s).cos());
            let expected = half / BasisKind::CosineCosine.mass().sigma(m);
            assert_abs_diff_eq!(a.get(m, 0), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn basis_function_projects_to_itself() {
        let modes = ModeSet::new(BasisKind::SineSine, 3);
        let f: ScalarFn = Arc::new(|x, y| (PI * x).sin() * (PI * y).sin());
        let a = project_initial(&InitialCondition::Projected(f), modes).unwrap();
        for (m, n) in modes.iter() {
            let expected = if (m, n) == (1, 1) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(a.get(m, n), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn explicit_modes_checked() {
        let modes = ModeSet::new(BasisKind::SineSine, 2);
        let ic = InitialCondition::Modes(vec![((0, 1), 1.0)]);
        assert!(project_initial(&ic, modes).is_err());
        let ic = InitialCondition::Modes(vec![((2, 1), 0.5)]);
        assert_eq!(project_initial(&ic, modes).unwrap().get(2, 1), 0.5);
    }

    #[test]
    fn tables_match_closed_form_integrals() {
        for phase in [SwitchPhase::Part1, SwitchPhase::Part2] {
            let p = phase.p() as usize;
            for m in 0..=10 {
                for i in 0..=10 {
                    let a = integral_triple(TrigFactor::cos(m), TrigFactor::sin(p), TrigFactor::sin(i));
                    let c = integral_triple(TrigFactor::cos(m), TrigFactor::cos(p), TrigFactor::cos(i));
                    let b = integral_triple(TrigFactor::cos(m), TrigFactor::cos(1), TrigFactor::cos(i));
                    let d = integral_triple(TrigFactor::cos(m), TrigFactor::sin(1), TrigFactor::sin(i));
                    assert_abs_diff_eq!(table_a(phase, m, i), a, epsilon = 1e-15);
                    assert_abs_diff_eq!(table_c(phase, m, i), c, epsilon = 1e-15);
                    assert_abs_diff_eq!(table_b(phase, m, i), b, epsilon = 1e-15);
                    assert_abs_diff_eq!(table_d(phase, m, i), d, epsilon = 1e-15);
                }
            }
        }
        assert_eq!(table_a(SwitchPhase::Part1, 0, 1), 0.5);
        assert_eq!(table_a(SwitchPhase::Part1, 0, 2), 0.0);
        assert_eq!(table_a(SwitchPhase::Part2, 0, 2), 0.5);
        assert_eq!(table_a(SwitchPhase::Part2, 0, 1), 0.0);
    }

    #[test]
    fn switching_matches_generic_cosine_assembly() {
        let n = 5;
        let tensors = CouplingTensors::build_for(BasisKind::CosineCosine, n, 2, u128::MAX).unwrap();
        for phase in [SwitchPhase::Part1, SwitchPhase::Part2] {
            let generic = assemble_advection(&tensors, &phase.velocity(2).unwrap()).unwrap();
            let table = switching_advection(n, phase);
            assert!((generic - table).amax() < 1e-13, "{phase:?}");
        }
    }

    #[test]
    fn switching_is_skew_in_mass_inner_product() {
        let modes = ModeSet::new(BasisKind::CosineCosine, 6);
        let mass = modes.basis.mass();
        let w = DVector::from_iterator(modes.len(), modes.iter().map(|(m, n)| mass.weight(m, n)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for phase in [SwitchPhase::Part1, SwitchPhase::Part2] {
            let adv = switching_advection(6, phase);
            for _ in 0..20 {
                let a = DVector::from_fn(modes.len(), |_, _| rng.gen_range(-1.0..1.0));
                let q = a.component_mul(&w).dot(&(&adv * &a));
                assert!(q.abs() < 1e-12, "{q}");
            }
            // mean mode is untouched by advection
            assert!(adv.row(0).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn fixed_flow_is_skew() {
        let op = build_fixed_flow_operator(6, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = DVector::from_fn(op.modes.len(), |_, _| rng.gen_range(-1.0..1.0));
            assert!(a.dot(&(&op.advection * &a)).abs() < 1e-12);
        }
        assert!(op.advection.iter().any(|v| v.abs() > 1e-3));
    }
}
