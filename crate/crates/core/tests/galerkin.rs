//! Advection matrices against brute-force 2-D Galerkin quadrature of
//! `(1 / sigma_m sigma_n) int int phi_mn (v . grad phi_ij)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectral_mixing::integrals::UnitQuadrature;
use spectral_mixing::operator::assemble_advection;
use spectral_mixing::scenarios::{build_fixed_flow_operator, switching_advection, SwitchPhase};
use spectral_mixing::{BasisKind, Constraint, CouplingTensors, ModeSet};
use std::f64::consts::PI;

fn galerkin<V: Fn(f64, f64) -> (f64, f64)>(modes: ModeSet, v: V) -> DMatrix<f64> {
    let nodes = UnitQuadrature::new(64).nodes_weights();
    let b = modes.basis;
    let mass = b.mass();
    let mut out = DMatrix::zeros(modes.len(), modes.len());
    for &(x, wx) in &nodes {
        for &(y, wy) in &nodes {
            let (v1, v2) = v(x, y);
            let w = wx * wy;
            for (row, (m, n)) in modes.iter().enumerate() {
                let test = b.factor(m, x) * b.factor(n, y) * w / mass.weight(m, n);
                for (col, (i, j)) in modes.iter().enumerate() {
                    let adv = v1 * b.factor_derivative(i, x) * b.factor(j, y)
                        + v2 * b.factor(i, x) * b.factor_derivative(j, y);
                    out[(row, col)] += test * adv;
                }
            }
        }
    }
    out
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn tensor_assembly_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for basis in [BasisKind::SineSine, BasisKind::CosineCosine] {
        let t = CouplingTensors::build_for(basis, 4, 3, 1 << 20).unwrap();
        for _ in 0..3 {
            let vel = Constraint::L2Unit.random_feasible(3, &mut rng);
            let a = assemble_advection(&t, &vel).unwrap();
            let q = galerkin(t.modes(), |x, y| vel.eval(x, y));
            assert!(max_diff(&a, &q) < 1e-8, "{basis}: {}", max_diff(&a, &q));
        }
    }
}

#[test]
fn fixed_flow_matches_quadrature() {
    let op = build_fixed_flow_operator(4, 0.01).unwrap();
    let q = galerkin(op.modes, |_, y| ((2.0 * PI * y).sin(), 0.0));
    assert!(max_diff(&op.advection, &q) < 1e-8, "{}", max_diff(&op.advection, &q));
}

#[test]
fn switching_phases_match_quadrature() {
    let modes = ModeSet::new(BasisKind::CosineCosine, 4);
    let part1 = galerkin(modes, |x, y| {
        ((PI * x).sin() * (PI * y).cos(), -(PI * x).cos() * (PI * y).sin())
    });
    let part2 = galerkin(modes, |x, y| {
        (-(2.0 * PI * x).sin() * (PI * y).cos(), 2.0 * (2.0 * PI * x).cos() * (PI * y).sin())
    });
    let a1 = switching_advection(4, SwitchPhase::Part1);
    let a2 = switching_advection(4, SwitchPhase::Part2);
    assert!(max_diff(&a1, &part1) < 1e-8, "{}", max_diff(&a1, &part1));
    assert!(max_diff(&a2, &part2) < 1e-8, "{}", max_diff(&a2, &part2));
}
