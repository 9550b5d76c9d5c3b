//! Fixed-step RK4 integration of the Galerkin system and the mixing
//! diagnostics recorded along a trajectory.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::basis::ModeSet;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::fmt_float;
use crate::operator::diffusion_diagonal;

/// Coefficients larger than this abort the integration.
pub const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Fails unless `dt > 0` divides `t_final - t0` up to rounding.
    pub fn new(t0: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() || !t_final.is_finite() || t_final < t0 {
            return Err(Error::InvalidInput(format!(
                "bad time grid t0={t0}, t_final={t_final}, dt={dt}"
            )));
        }
        let span = t_final - t0;
        let steps = (span / dt).round() as usize;
        let tol = 64.0 * f64::EPSILON * span.abs().max(1.0) * (steps.max(1) as f64);
        if (steps as f64 * dt - span).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "dt={dt} does not divide the interval [{t0}, {t_final}]"
            )));
        }
        Ok(Self {
            t0,
            t_final,
            dt,
            steps,
        })
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps {
            self.t_final
        } else {
            self.t0 + step as f64 * self.dt
        }
    }
}

/// Piecewise-constant advection matrices in time.
#[derive(Debug, Clone)]
pub enum AdvectionSchedule {
    Constant(DMatrix<f64>),
    /// `mats[s]` applies on `[starts[s], starts[s+1])`; the last one forever.
    Piecewise {
        starts: Vec<f64>,
        mats: Vec<DMatrix<f64>>,
    },
    /// Repeats with `period`; phase `p` starts at offset `offsets[p]`.
    Periodic {
        period: f64,
        offsets: Vec<f64>,
        mats: Vec<DMatrix<f64>>,
    },
}

impl AdvectionSchedule {
    pub fn none(dim: usize) -> Self {
        AdvectionSchedule::Constant(DMatrix::zeros(dim, dim))
    }

    pub fn matrix_at(&self, t: f64) -> &DMatrix<f64> {
        match self {
            AdvectionSchedule::Constant(m) => m,
            AdvectionSchedule::Piecewise { starts, mats } => {
                let seg = starts.iter().rposition(|&s| s <= t).unwrap_or(0);
                &mats[seg]
            }
            AdvectionSchedule::Periodic { period, offsets, mats } => {
                let phase = t - (t / period).floor() * period;
                let seg = offsets.iter().rposition(|&s| s <= phase).unwrap_or(0);
                &mats[seg]
            }
        }
    }

    fn matrices(&self) -> Box<dyn Iterator<Item = &DMatrix<f64>> + '_> {
        match self {
            AdvectionSchedule::Constant(m) => Box::new(std::iter::once(m)),
            AdvectionSchedule::Piecewise { mats, .. } | AdvectionSchedule::Periodic { mats, .. } => {
                Box::new(mats.iter())
            }
        }
    }

    /// Largest infinity norm over all matrices in the schedule.
    pub fn max_norm(&self) -> f64 {
        self.matrices()
            .map(|m| {
                m.row_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// `da/dt = -A(t) a - D a` with a prescribed advection schedule.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub modes: ModeSet,
    pub kappa: f64,
    pub diffusion: DVector<f64>,
    pub schedule: AdvectionSchedule,
}

impl LinearSystem {
    pub fn new(modes: ModeSet, kappa: f64, schedule: AdvectionSchedule) -> Self {
        Self {
            modes,
            kappa,
            diffusion: diffusion_diagonal(modes, kappa),
            schedule,
        }
    }

    pub fn pure_diffusion(modes: ModeSet, kappa: f64) -> Self {
        Self::new(modes, kappa, AdvectionSchedule::none(modes.len()))
    }

    fn rhs_with(&self, adv: &DMatrix<f64>, a: &DVector<f64>) -> DVector<f64> {
        -(adv * a) - self.diffusion.component_mul(a)
    }

    pub fn rhs(&self, t: f64, a: &DVector<f64>) -> DVector<f64> {
        self.rhs_with(self.schedule.matrix_at(t), a)
    }

    /// `c_stab / (max D + max ||A||_inf)` with `c_stab = 1`.
    pub fn stability_limit(&self) -> f64 {
        let dmax = self.diffusion.iter().copied().fold(0.0, f64::max);
        let denom = dmax + self.schedule.max_norm();
        if denom == 0.0 {
            f64::INFINITY
        } else {
            denom.recip()
        }
    }
}

/// One classical RK4 step.
///
/// The advection matrix is sampled at the step midpoint and held over the
/// step: schedules switch only on step boundaries, so this is the value at
/// every stage time inside `[t, t + dt)`.
pub fn step_rk4(sys: &LinearSystem, a: &SpectralField, t: f64, dt: f64) -> Result<SpectralField> {
    if a.modes() != sys.modes {
        return Err(Error::DimensionMismatch {
            what: "field modes",
            expected: sys.modes.len(),
            got: a.modes().len(),
        });
    }
    let adv = sys.schedule.matrix_at(t + 0.5 * dt);
    let y = a.coeffs();
    let k1 = sys.rhs_with(adv, y);
    let k2 = sys.rhs_with(adv, &(y + &k1 * (0.5 * dt)));
    let k3 = sys.rhs_with(adv, &(y + &k2 * (0.5 * dt)));
    let k4 = sys.rhs_with(adv, &(y + &k3 * dt));
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let magnitude = next.amax();
    if magnitude.is_nan() || magnitude > BLOWUP_LIMIT {
        return Err(Error::Unstable { t: t + dt, magnitude });
    }
    SpectralField::from_coeffs(sys.modes, next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Gradient energy `||grad phi||^2`.
    pub q: f64,
    /// `||phi||^2`.
    pub norm2: f64,
    /// `||phi - <phi(., 0)>||^2`.
    pub variance: f64,
}

impl Diagnostics {
    pub fn of(a: &SpectralField, reference_mean: f64) -> Self {
        Self {
            q: a.gradient_energy(),
            norm2: a.norm2(),
            variance: a.variance_about(reference_mean),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub diagnostics: Vec<Diagnostics>,
    /// Mean of the initial field, subtracted in the variance.
    pub reference_mean: f64,
}

impl Trajectory {
    pub fn new(a0: SpectralField, t0: f64) -> Self {
        let reference_mean = a0.mean();
        Self {
            times: vec![t0],
            diagnostics: vec![Diagnostics::of(&a0, reference_mean)],
            states: vec![a0],
            reference_mean,
        }
    }

    pub fn push(&mut self, t: f64, a: SpectralField) {
        self.diagnostics.push(Diagnostics::of(&a, self.reference_mean));
        self.times.push(t);
        self.states.push(a);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Diagnostics at the sample closest to `t`.
    pub fn at_time(&self, t: f64) -> Option<(f64, Diagnostics)> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some((self.times[idx], self.diagnostics[idx]))
    }

    /// CSV `t,Q,norm2,V`, plus `a_m_n` columns when `dump_modes` is set.
    pub fn write_csv<W: Write>(&self, mut out: W, dump_modes: bool) -> Result<()> {
        write!(out, "t,Q,norm2,V")?;
        let modes = self.states.first().map(|s| s.modes());
        if dump_modes {
            if let Some(modes) = modes {
                for (m, n) in modes.iter() {
                    write!(out, ",a_{m}_{n}")?;
                }
            }
        }
        writeln!(out)?;
        for ((t, d), s) in self.times.iter().zip(&self.diagnostics).zip(&self.states) {
            write!(
                out,
                "{},{},{},{}",
                fmt_float(*t),
                fmt_float(d.q),
                fmt_float(d.norm2),
                fmt_float(d.variance)
            )?;
            if dump_modes {
                for c in s.coeffs().iter() {
                    write!(out, ",{}", fmt_float(*c))?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Keep every `record_every`-th state (the final state is always kept).
    pub record_every: usize,
    /// Reject `dt` above [`LinearSystem::stability_limit`].
    pub enforce_stability: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            enforce_stability: true,
        }
    }
}

pub fn simulate(sys: &LinearSystem, a0: SpectralField, grid: &TimeGrid, opts: SimOptions) -> Result<Trajectory> {
    if opts.enforce_stability {
        let limit = sys.stability_limit();
        if grid.dt > limit {
            return Err(Error::StepTooLarge { dt: grid.dt, limit });
        }
    }
    let every = opts.record_every.max(1);
    let mut traj = Trajectory::new(a0.clone(), grid.t0);
    let mut state = a0;
    for step in 0..grid.steps {
        let t = grid.time(step);
        state = step_rk4(sys, &state, t, grid.dt)?;
        let done = step + 1;
        if done % every == 0 || done == grid.steps {
            traj.push(grid.time(done), state.clone());
        }
    }
    Ok(traj)
}

/// Largest residual of `d||phi||^2/dt + 2 kappa ||grad phi||^2` over interior
/// samples, using centered differences in time and normalized by
/// `max(1, Q(t))`.
pub fn check_energy_identity(traj: &Trajectory, kappa: f64) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "energy identity needs at least 3 samples, got {}",
            traj.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        let dn = traj.diagnostics[k + 1].norm2 - traj.diagnostics[k - 1].norm2;
        let dt = traj.times[k + 1] - traj.times[k - 1];
        let q = traj.diagnostics[k].q;
        let residual = (dn / dt + 2.0 * kappa * q).abs() / q.max(1.0);
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Samples `phi_N` on a `grid x grid` lattice as CSV `x,y,phi`.
pub fn write_field_csv<W: Write>(field: &SpectralField, grid: usize, mut out: W) -> Result<()> {
    let values = field.reconstruct(grid)?;
    let h = 1.0 / (grid - 1) as f64;
    writeln!(out, "x,y,phi")?;
    for r in 0..grid {
        for c in 0..grid {
            writeln!(
                out,
                "{},{},{}",
                fmt_float(r as f64 * h),
                fmt_float(c as f64 * h),
                fmt_float(values[(r, c)])
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::operator::OdeOperator;
    use crate::velocity::Constraint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(n: usize) -> ModeSet {
        ModeSet::new(BasisKind::SineSine, n)
    }

    #[test]
    fn time_grid_validation() {
        let g = TimeGrid::new(0.0, 5.0, 0.00125).unwrap();
        assert_eq!(g.steps, 4000);
        assert_eq!(g.time(g.steps), 5.0);
        assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn single_mode_diffusion_matches_exponential() {
        let modes = sine(2);
        let sys = LinearSystem::pure_diffusion(modes, 0.01);
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let a0 = SpectralField::single_mode(modes, 1, 1, 1.0);
        let traj = simulate(&sys, a0, &grid, SimOptions::default()).unwrap();
        let exact = (-0.02 * PI * PI).exp();
        assert!((traj.last().get(1, 1) - exact).abs() < 1e-8);
        assert!(traj.diagnostics.windows(2).all(|w| w[1].q < w[0].q));
        let residual = check_energy_identity(&traj, 0.01).unwrap();
        assert!(residual < 1e-6, "{residual}");
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        let op = OdeOperator::sine(2, 2, 0.01).unwrap();
        let vel = Constraint::L2Unit.first_basis_control(2);
        let sys = LinearSystem::new(op.modes(), 0.01, AdvectionSchedule::Constant(op.advection(&vel).unwrap()));
        let grid = TimeGrid::new(0.0, 0.1, 1e-3).unwrap();
        let traj = simulate(&sys, SpectralField::zeros(op.modes()), &grid, SimOptions::default()).unwrap();
        assert!(traj.diagnostics.iter().all(|d| d.q == 0.0 && d.norm2 == 0.0 && d.variance == 0.0));
    }

    #[test]
    fn advection_conserves_norm_without_diffusion() {
        let op = OdeOperator::sine(3, 3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vel = Constraint::L2Unit.random_feasible(3, &mut rng);
        let sys = LinearSystem::new(op.modes(), 0.0, AdvectionSchedule::Constant(op.advection(&vel).unwrap()));
        let a0 = SpectralField::single_mode(op.modes(), 1, 2, 1.0);
        let n0 = a0.norm2();
        let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
        let traj = simulate(&sys, a0, &grid, SimOptions { record_every: 100, ..Default::default() }).unwrap();
        assert!((traj.last().norm2() - n0).abs() / n0 < 1e-6);
        assert_eq!(traj.len(), 11);
    }

    #[test]
    fn schedules_switch_on_boundaries() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = DMatrix::from_element(1, 1, 2.0);
        let periodic = AdvectionSchedule::Periodic {
            period: 1.0,
            offsets: vec![0.0, 0.75],
            mats: vec![a.clone(), b.clone()],
        };
        assert_eq!(periodic.matrix_at(0.7)[(0, 0)], 1.0);
        assert_eq!(periodic.matrix_at(0.75)[(0, 0)], 2.0);
        assert_eq!(periodic.matrix_at(3.2)[(0, 0)], 1.0);
        assert_eq!(periodic.matrix_at(3.9)[(0, 0)], 2.0);
        let piecewise = AdvectionSchedule::Piecewise {
            starts: vec![0.0, 0.5],
            mats: vec![a, b],
        };
        assert_eq!(piecewise.matrix_at(0.25)[(0, 0)], 1.0);
        assert_eq!(piecewise.matrix_at(0.9)[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_oversized_step_and_blowup() {
        let modes = sine(4);
        let sys = LinearSystem::pure_diffusion(modes, 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 0.5).unwrap();
        let a0 = SpectralField::single_mode(modes, 1, 1, 1.0);
        assert!(matches!(
            simulate(&sys, a0.clone(), &grid, SimOptions::default()),
            Err(Error::StepTooLarge { .. })
        ));
        let loose = SimOptions { enforce_stability: false, ..Default::default() };
        let grid = TimeGrid::new(0.0, 50.0, 0.5).unwrap();
        let big = SpectralField::single_mode(modes, 4, 4, 1.0);
        let err = simulate(&sys, big, &grid, loose).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn deterministic() {
        let op = OdeOperator::sine(2, 2, 0.01).unwrap();
        let vel = Constraint::L2Unit.first_basis_control(2);
        let sys = LinearSystem::new(op.modes(), 0.01, AdvectionSchedule::Constant(op.advection(&vel).unwrap()));
        let grid = TimeGrid::new(0.0, 0.2, 1e-3).unwrap();
        let a0 = SpectralField::single_mode(op.modes(), 1, 2, 1.0);
        let t1 = simulate(&sys, a0.clone(), &grid, SimOptions::default()).unwrap();
        let t2 = simulate(&sys, a0, &grid, SimOptions::default()).unwrap();
        assert_eq!(t1.last(), t2.last());
    }

    #[test]
    fn trajectory_csv_header() {
        let modes = sine(1);
        let sys = LinearSystem::pure_diffusion(modes, 0.1);
        let grid = TimeGrid::new(0.0, 0.01, 0.005).unwrap();
        let traj = simulate(&sys, SpectralField::single_mode(modes, 1, 1, 1.0), &grid, SimOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,Q,norm2,V,a_1_1\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(check_energy_identity(&Trajectory::new(SpectralField::zeros(modes), 0.0), 0.1).is_err());
    }
}
