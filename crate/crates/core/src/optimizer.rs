//! Velocity optimization for the bilinear system.
//!
//! Two methods:
//!
//! * a pointwise-greedy control that maximizes the instantaneous decay
//!   `-dQ/dt`. For a fixed state `-dQ/dt` is affine in `alpha`, so the
//!   maximizer over the ellipsoid `alpha^T W alpha = r` is the supporting
//!   point `sqrt(r) W^-1 g / sqrt(g^T W^-1 g)`;
//! * projected-gradient direct shooting for `min Q(t_final)` over
//!   piecewise-constant controls, with central finite-difference
//!   sensitivities and radial projection back onto the constraint.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::fmt_float;
use crate::operator::OdeOperator;
use crate::simulator::{step_rk4, AdvectionSchedule, LinearSystem, TimeGrid, Trajectory};
use crate::velocity::{Constraint, VelocityCoefficients};

/// Feasibility tolerance required of initial controls.
pub const INIT_TOL: f64 = 1e-8;

/// Relative size of the central-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GreedyControl {
    pub vel: VelocityCoefficients,
    /// Set when the decay rate does not depend on the control at this state.
    pub degenerate: bool,
    pub gradient: DVector<f64>,
}

pub fn greedy_instantaneous(op: &OdeOperator, a: &SpectralField, constraint: Constraint) -> Result<GreedyControl> {
    let m = op.velocity_modes();
    let g = op.control_gradient(a)?;
    let scale = a.gradient_energy();
    if g.norm() <= 1e-12 * scale || g.norm() == 0.0 {
        return Ok(GreedyControl {
            vel: constraint.first_basis_control(m),
            degenerate: true,
            gradient: g,
        });
    }
    let w = constraint.metric_diagonal(m);
    let winv_g = g.component_div(&w);
    let denom = g.dot(&winv_g).sqrt();
    let alpha = winv_g * (constraint.rhs().sqrt() / denom);
    let vel = VelocityCoefficients::from_alpha(m, alpha.as_slice())?;
    Ok(GreedyControl {
        vel,
        degenerate: false,
        gradient: g,
    })
}

/// `||g - lambda W alpha|| / ||g||` with the least-squares `lambda`; zero when
/// `g` and `W alpha` are collinear.
pub fn kkt_residual(g: &DVector<f64>, constraint: Constraint, vel: &VelocityCoefficients) -> f64 {
    let w = constraint.metric_diagonal(vel.m());
    let wa = w.component_mul(&vel.alpha_vector());
    let lambda = g.dot(&wa) / wa.dot(&wa);
    (g - wa * lambda).norm() / g.norm()
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub op: OdeOperator,
    pub a0: SpectralField,
    pub horizon: TimeGrid,
    pub constraint: Constraint,
    pub segments: usize,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::InvalidInput("segments must be at least 1".into()));
        }
        if !self.horizon.steps.is_multiple_of(self.segments) {
            return Err(Error::InvalidInput(format!(
                "{} steps cannot be split into {} equal control segments",
                self.horizon.steps, self.segments
            )));
        }
        if self.a0.modes() != self.op.modes() {
            return Err(Error::DimensionMismatch {
                what: "initial field modes",
                expected: self.op.modes().len(),
                got: self.a0.modes().len(),
            });
        }
        Ok(())
    }

    pub fn steps_per_segment(&self) -> usize {
        self.horizon.steps / self.segments
    }

    /// `[t_start, t_end)` of each control segment.
    pub fn segment_bounds(&self) -> Vec<(f64, f64)> {
        let per = self.steps_per_segment();
        (0..self.segments)
            .map(|s| (self.horizon.time(s * per), self.horizon.time((s + 1) * per)))
            .collect()
    }

    /// `Q(t_final)` under the given piecewise-constant controls.
    pub fn objective(&self, controls: &[VelocityCoefficients]) -> Result<f64> {
        Ok(self.final_state(controls)?.gradient_energy())
    }

    pub fn final_state(&self, controls: &[VelocityCoefficients]) -> Result<SpectralField> {
        let sys = self.system(controls)?;
        let mut state = self.a0.clone();
        for step in 0..self.horizon.steps {
            state = step_rk4(&sys, &state, self.horizon.time(step), self.horizon.dt)?;
        }
        Ok(state)
    }

    pub fn system(&self, controls: &[VelocityCoefficients]) -> Result<LinearSystem> {
        if controls.len() != self.segments {
            return Err(Error::DimensionMismatch {
                what: "control segments",
                expected: self.segments,
                got: controls.len(),
            });
        }
        let mats = controls
            .iter()
            .map(|c| self.op.advection(c))
            .collect::<Result<Vec<DMatrix<f64>>>>()?;
        let starts = self.segment_bounds().iter().map(|b| b.0).collect();
        Ok(LinearSystem::new(
            self.op.modes(),
            self.op.kappa(),
            AdvectionSchedule::Piecewise { starts, mats },
        ))
    }
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub controls: Vec<VelocityCoefficients>,
    /// `[t_start, t_end)` for each entry of `controls`.
    pub bounds: Vec<(f64, f64)>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Objective after each accepted iterate, starting with the initial one.
    pub history: Vec<f64>,
}

impl ControlSolution {
    /// The same control held over every segment.
    pub fn constant(problem: &ControlProblem, vel: VelocityCoefficients) -> Result<Self> {
        let controls = vec![vel; problem.segments];
        let objective_value = problem.objective(&controls)?;
        Ok(Self {
            controls,
            bounds: problem.segment_bounds(),
            objective_value,
            iterations: 0,
            history: vec![objective_value],
        })
    }

    /// CSV `segment,t_start,t_end,alpha_k_l,beta_k_l,...` and a trailing
    /// `# objective=<v> iterations=<n>` summary line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "segment,t_start,t_end")?;
        if let Some(first) = self.controls.first() {
            for (k, l) in first.modes() {
                write!(out, ",alpha_{k}_{l},beta_{k}_{l}")?;
            }
        }
        writeln!(out)?;
        for (s, (vel, (t0, t1))) in self.controls.iter().zip(&self.bounds).enumerate() {
            write!(out, "{s},{},{}", fmt_float(*t0), fmt_float(*t1))?;
            for (k, l) in vel.modes() {
                write!(out, ",{},{}", fmt_float(vel.alpha_at(k, l)), fmt_float(vel.beta_at(k, l)))?;
            }
            writeln!(out)?;
        }
        writeln!(
            out,
            "# objective={} iterations={}",
            fmt_float(self.objective_value),
            self.iterations
        )?;
        Ok(())
    }
}

fn flatten(controls: &[VelocityCoefficients]) -> Vec<f64> {
    controls.iter().flat_map(|c| c.alpha().iter().copied()).collect()
}

fn unflatten(m: usize, x: &[f64]) -> Result<Vec<VelocityCoefficients>> {
    x.chunks(m * m).map(|c| VelocityCoefficients::from_alpha(m, c)).collect()
}

/// Radial projection of every segment onto the constraint.
fn project_all(constraint: Constraint, controls: Vec<VelocityCoefficients>) -> Option<Vec<VelocityCoefficients>> {
    controls.iter().map(|c| constraint.project(c)).collect()
}

/// Projected-gradient descent on `Q(t_final)`.
///
/// Each accepted iterate strictly lowers the objective, so the recorded
/// history is non-increasing. Stops when the relative improvement drops
/// below `tol`, no descent step is found, or after `max_iter` iterations.
pub fn optimize_horizon(
    problem: &ControlProblem,
    init: &ControlSolution,
    max_iter: usize,
    tol: f64,
) -> Result<ControlSolution> {
    problem.validate()?;
    if init.controls.len() != problem.segments {
        return Err(Error::DimensionMismatch {
            what: "control segments",
            expected: problem.segments,
            got: init.controls.len(),
        });
    }
    let residual = init
        .controls
        .iter()
        .map(|c| problem.constraint.violation(c))
        .fold(0.0, f64::max);
    if residual > INIT_TOL {
        return Err(Error::InfeasibleInit { residual });
    }
    let m = problem.op.velocity_modes();
    let mut controls = init.controls.clone();
    let mut value = problem.objective(&controls)?;
    let mut history = vec![value];
    if max_iter == 0 {
        return Ok(ControlSolution {
            controls,
            bounds: problem.segment_bounds(),
            objective_value: value,
            iterations: 0,
            history,
        });
    }

    let mut step = None::<f64>;
    let mut iterations = 0;
    while iterations < max_iter {
        let x = flatten(&controls);
        let grad = fd_gradient(problem, m, &x)?;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut s = step.unwrap_or(0.25 * xnorm / gnorm);
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - s * gi).collect();
            if let Some(cand) = project_all(problem.constraint, unflatten(m, &trial)?) {
                let v = problem.objective(&cand)?;
                if v < value {
                    accepted = Some((cand, v));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        iterations += 1;
        let improvement = (value - v) / value.abs().max(f64::MIN_POSITIVE);
        controls = cand;
        value = v;
        history.push(v);
        step = Some(2.0 * s);
        if improvement < tol {
            break;
        }
    }

    Ok(ControlSolution {
        controls,
        bounds: problem.segment_bounds(),
        objective_value: value,
        iterations,
        history,
    })
}

/// Central differences of the objective with respect to every `alpha`
/// component of every segment.
fn fd_gradient(problem: &ControlProblem, m: usize, x: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for c in 0..x.len() {
        let h = FD_STEP * x[c].abs().max(1.0);
        probe[c] = x[c] + h;
        let plus = problem.objective(&unflatten(m, &probe)?)?;
        probe[c] = x[c] - h;
        let minus = problem.objective(&unflatten(m, &probe)?)?;
        probe[c] = x[c];
        grad[c] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Closed-loop greedy control, re-evaluated every `resample_every` steps.
pub fn greedy_schedule(
    op: &OdeOperator,
    a0: SpectralField,
    grid: &TimeGrid,
    constraint: Constraint,
    resample_every: usize,
) -> Result<(ControlSolution, Trajectory, Vec<bool>)> {
    let every = resample_every.max(1);
    let mut traj = Trajectory::new(a0.clone(), grid.t0);
    let mut state = a0;
    let mut controls = Vec::new();
    let mut bounds = Vec::new();
    let mut flags = Vec::new();
    let mut step = 0;
    while step < grid.steps {
        let greedy = greedy_instantaneous(op, &state, constraint)?;
        let sys = LinearSystem::new(
            op.modes(),
            op.kappa(),
            AdvectionSchedule::Constant(op.advection(&greedy.vel)?),
        );
        let end = (step + every).min(grid.steps);
        for s in step..end {
            state = step_rk4(&sys, &state, grid.time(s), grid.dt)?;
            traj.push(grid.time(s + 1), state.clone());
        }
        bounds.push((grid.time(step), grid.time(end)));
        controls.push(greedy.vel);
        flags.push(greedy.degenerate);
        step = end;
    }
    let objective_value = state.gradient_energy();
    Ok((
        ControlSolution {
            controls,
            bounds,
            objective_value,
            iterations: 0,
            history: vec![objective_value],
        },
        traj,
        flags,
    ))
}
