use nalgebra::DMatrix;
use spectral_mixing::scenarios::{build_fixed_flow_operator, project_initial, switching_system, InitialCondition, SWITCH_OFFSET};
use spectral_mixing::simulator::{simulate, SimOptions, TimeGrid};
use spectral_mixing::{BasisKind, ModeSet, SpectralField};

fn fixed_flow_error(dt: f64) -> f64 {
    let op = build_fixed_flow_operator(4, 0.05).unwrap();
    let mut a0 = SpectralField::zeros(op.modes);
    a0.set(1, 1, 1.0);
    a0.set(2, 3, -0.4);
    let sys = op.system();
    let grid = TimeGrid::new(0.0, 1.0, dt).unwrap();
    let traj = simulate(&sys, a0.clone(), &grid, SimOptions::default()).unwrap();
    let generator = -(DMatrix::from_diagonal(&sys.diffusion) + &op.advection);
    let exact = generator.exp() * a0.coeffs();
    (traj.last().coeffs() - exact).amax()
}

#[test]
fn rk4_matches_matrix_exponential_at_fourth_order() {
    let coarse = fixed_flow_error(0.02);
    let fine = fixed_flow_error(0.01);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    assert!(fixed_flow_error(1e-3) < 1e-10);
}

#[test]
fn switching_state_is_continuous_across_switches() {
    let modes = ModeSet::new(BasisKind::CosineCosine, 6);
    let a0 = project_initial(&InitialCondition::Step, modes).unwrap();
    let sys = switching_system(6, 0.001).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 0.00125).unwrap();
    let traj = simulate(&sys, a0, &grid, SimOptions::default()).unwrap();
    let k = (SWITCH_OFFSET / 0.00125).round() as usize;
    let jump = (traj.states[k + 1].coeffs() - traj.states[k].coeffs()).amax();
    let before = (traj.states[k].coeffs() - traj.states[k - 1].coeffs()).amax();
    // one step across the switch moves the state no more than a regular step would
    assert!(jump < 10.0 * before + 1e-12, "{jump} vs {before}");
    // the mean is conserved throughout
    for s in &traj.states {
        assert!((s.get(0, 0) - 0.5).abs() < 1e-12);
    }
}
