//! Entrywise bounds on the advection matrix.
//!
//! With `K[m,n,i,j] = max(i |A[m,n,.,.,i,j]|, j |B[m,n,.,.,i,j]|)` (Euclidean
//! norms over the velocity modes) and `K = max K[m,n,i,j]`, Cauchy-Schwarz on
//! each row gives `|A_ij| <= 8 sqrt(2) pi K` for every unit-L2 velocity. The
//! hatted quantities weight the sums by `1/(k^2 + l^2)` and bound the entries
//! for unit-H1 velocities.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::fmt_float;
use crate::operator::{advection_prefactor, assemble_advection};
use crate::tensors::{CouplingTensors, DEFAULT_ENTRY_BUDGET};
use crate::velocity::{Constraint, VelocityCoefficients};

/// Row mode `(m, n)` and column mode `(i, j)`.
pub type IndexKey = (usize, usize, usize, usize);

/// Relative slack allowed on top of a bound before flagging a violation.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub k: f64,
    pub per_index: BTreeMap<IndexKey, f64>,
}

impl BoundConstants {
    pub fn get(&self, m: usize, n: usize, i: usize, j: usize) -> f64 {
        self.per_index.get(&(m, n, i, j)).copied().unwrap_or(0.0)
    }

    /// Index attaining the maximum, if any entry is nonzero.
    pub fn argmax(&self) -> Option<IndexKey> {
        self.per_index
            .iter()
            .filter(|(_, v)| **v > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| *k)
    }
}

fn weighted_constants(tensors: &CouplingTensors, weight: impl Fn(usize, usize) -> f64) -> BoundConstants {
    let mut sums: BTreeMap<IndexKey, (f64, f64)> = BTreeMap::new();
    for (key, e) in tensors.iter() {
        let w = weight(key.k, key.l);
        let s = sums.entry((key.m, key.n, key.i, key.j)).or_default();
        s.0 += w * e.a * e.a;
        s.1 += w * e.b * e.b;
    }
    let per_index: BTreeMap<IndexKey, f64> = sums
        .into_iter()
        .map(|((m, n, i, j), (sa, sb))| ((m, n, i, j), (i as f64 * sa.sqrt()).max(j as f64 * sb.sqrt())))
        .collect();
    let k = per_index.values().copied().fold(0.0, f64::max);
    BoundConstants { k, per_index }
}

pub fn compute_k(tensors: &CouplingTensors) -> BoundConstants {
    weighted_constants(tensors, |_, _| 1.0)
}

pub fn compute_k_hat(tensors: &CouplingTensors) -> BoundConstants {
    weighted_constants(tensors, |k, l| 1.0 / (k * k + l * l) as f64)
}

/// Largest `|advection_prefactor|` over the row modes (`4 pi` for sines).
fn max_prefactor(tensors: &CouplingTensors) -> f64 {
    tensors
        .modes()
        .iter()
        .map(|(m, n)| advection_prefactor(tensors.basis(), m, n).abs())
        .fold(0.0, f64::max)
}

/// The global bound `8 sqrt(2) pi K` (pass the hatted constants for H1) on
/// the sine basis, with `4 pi` replaced by the largest row prefactor in
/// general.
pub fn global_bound(tensors: &CouplingTensors, constants: &BoundConstants) -> f64 {
    max_prefactor(tensors) * 2.0 * SQRT_2 * constants.k
}

/// Per-entry Cauchy-Schwarz bound `|prefactor| sqrt(2 rhs) K[m,n,i,j]`.
///
/// For L2 this is `8 sqrt(2) pi K[m,n,i,j]` on the sine basis. For H1 it is
/// `8 sqrt(2) K_hat[m,n,i,j]`, a factor `pi` sharper than the global form.
pub fn index_bound(basis: BasisKind, constraint: Constraint, key: IndexKey, constants: &BoundConstants) -> f64 {
    let (m, n, i, j) = key;
    advection_prefactor(basis, m, n).abs() * (2.0 * constraint.rhs()).sqrt() * constants.get(m, n, i, j)
}

fn constants_for(tensors: &CouplingTensors, constraint: Constraint) -> BoundConstants {
    match constraint {
        Constraint::L2Unit => compute_k(tensors),
        Constraint::H1Unit => compute_k_hat(tensors),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCheck {
    pub constraint: Constraint,
    pub trials: usize,
    pub seed: u64,
    pub bound: f64,
    pub observed_max_entry: f64,
    /// Largest `|entry| / index_bound` seen over all trials.
    pub max_index_ratio: f64,
}

/// Samples `trials` feasible velocities and checks every entry of `A(t)`
/// against both the global and the per-index bound.
pub fn verify_entry_bounds(
    tensors: &CouplingTensors,
    trials: usize,
    constraint: Constraint,
    seed: u64,
) -> Result<EntryCheck> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let constants = constants_for(tensors, constraint);
    let bound = global_bound(tensors, &constants);
    let modes = tensors.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = 0.0f64;
    let mut ratio = 0.0f64;
    for _ in 0..trials {
        let vel = constraint.random_feasible(tensors.m(), &mut rng);
        let mat = assemble_advection(tensors, &vel)?;
        for (row, (m, n)) in modes.iter().enumerate() {
            for (col, (i, j)) in modes.iter().enumerate() {
                let value = mat[(row, col)];
                let local = index_bound(modes.basis, constraint, (m, n, i, j), &constants);
                let limit = bound.min(local) * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE;
                if value.abs() > limit {
                    return Err(Error::BoundViolation {
                        row,
                        col,
                        value,
                        bound: local.min(bound),
                    });
                }
                observed = observed.max(value.abs());
                if local > 0.0 {
                    ratio = ratio.max(value.abs() / local);
                }
            }
        }
    }
    Ok(EntryCheck {
        constraint,
        trials,
        seed,
        bound,
        observed_max_entry: observed,
        max_index_ratio: ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub key: IndexKey,
    pub vel: VelocityCoefficients,
    pub entry: f64,
    pub bound: f64,
}

impl Alignment {
    pub fn ratio(&self) -> f64 {
        self.entry.abs() / self.bound
    }
}

/// The feasible velocity that maximizes one chosen entry.
///
/// The entry is linear in `alpha` once `beta` is eliminated,
/// `entry = p sum c_kl alpha_kl` with `c = i A - j (k/l) B`, so the maximizer
/// on the constraint ellipsoid is `sqrt(rhs) W^-1 c / sqrt(c^T W^-1 c)`.
pub fn align_entry(tensors: &CouplingTensors, constraint: Constraint, key: IndexKey) -> Result<Alignment> {
    let (m, n, i, j) = key;
    let modes = tensors.modes();
    if !modes.contains(m, n) || !modes.contains(i, j) {
        return Err(Error::InvalidInput(format!("({m},{n},{i},{j}) is outside the mode set")));
    }
    let mv = tensors.m();
    let w = constraint.metric_diagonal(mv);
    let mut c = vec![0.0; mv * mv];
    for (key, e) in tensors.iter() {
        if (key.m, key.n, key.i, key.j) == (m, n, i, j) {
            let idx = (key.k - 1) * mv + (key.l - 1);
            c[idx] += i as f64 * e.a - j as f64 * (key.k as f64 / key.l as f64) * e.b;
        }
    }
    let q: f64 = c.iter().zip(w.iter()).map(|(ci, wi)| ci * ci / wi).sum();
    if q == 0.0 {
        return Err(Error::InvalidInput(format!("entry ({m},{n},{i},{j}) does not depend on the velocity")));
    }
    let scale = constraint.rhs().sqrt() / q.sqrt();
    let alpha: Vec<f64> = c.iter().zip(w.iter()).map(|(ci, wi)| scale * ci / wi).collect();
    let vel = VelocityCoefficients::from_alpha(mv, &alpha)?;
    let mat = assemble_advection(tensors, &vel)?;
    let entry = mat[(modes.index(m, n), modes.index(i, j))];
    let bound = index_bound(modes.basis, constraint, key, &constants_for(tensors, constraint));
    Ok(Alignment { key, vel, entry, bound })
}

/// The index with the largest attainable `entry / index_bound`.
pub fn tightest_alignment(tensors: &CouplingTensors, constraint: Constraint) -> Result<Alignment> {
    let constants = constants_for(tensors, constraint);
    let mut best: Option<Alignment> = None;
    for (&key, &v) in &constants.per_index {
        if v == 0.0 {
            continue;
        }
        // entries where the A and B contributions cancel identically
        let Ok(a) = align_entry(tensors, constraint, key) else { continue };
        if best.as_ref().is_none_or(|b| a.ratio() > b.ratio()) {
            best = Some(a);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("all coupling entries vanish".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSample {
    pub n: usize,
    pub k: f64,
    pub k_hat: f64,
}

/// `K` and `K_hat` for sine-basis truncations with `M = N`.
pub fn growth_study(sizes: &[usize]) -> Result<Vec<GrowthSample>> {
    sizes
        .iter()
        .map(|&n| {
            let t = CouplingTensors::build_for(BasisKind::SineSine, n, n, DEFAULT_ENTRY_BUDGET)?;
            Ok(GrowthSample {
                n,
                k: compute_k(&t).k,
                k_hat: compute_k_hat(&t).k,
            })
        })
        .collect()
}

/// Smallest `gamma` with `K(N) <= gamma N` over the samples.
pub fn fit_gamma(samples: &[GrowthSample]) -> f64 {
    samples.iter().map(|s| s.k / s.n as f64).fold(0.0, f64::max)
}

/// Smallest `gamma_hat` with `K_hat(N) <= gamma_hat` over the samples.
pub fn fit_gamma_hat(samples: &[GrowthSample]) -> f64 {
    samples.iter().map(|s| s.k_hat).fold(0.0, f64::max)
}

/// `max / min` of a positive sequence; the band test for growth claims.
pub fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub k: f64,
    pub k_hat: f64,
    pub per_index_k: BTreeMap<IndexKey, f64>,
    pub bound_l2: f64,
    pub bound_h1: f64,
    pub observed_max_entry: f64,
    pub growth_samples: Vec<GrowthSample>,
    pub gamma_fit: f64,
    pub gamma_hat_fit: f64,
    pub seed: u64,
}

impl BoundReport {
    /// Constants of `tensors`, an entry check under `constraint`, and a
    /// growth study over `sizes`.
    pub fn build(
        tensors: &CouplingTensors,
        trials: usize,
        constraint: Constraint,
        seed: u64,
        sizes: &[usize],
    ) -> Result<Self> {
        let k = compute_k(tensors);
        let k_hat = compute_k_hat(tensors);
        let check = verify_entry_bounds(tensors, trials, constraint, seed)?;
        let growth_samples = growth_study(sizes)?;
        Ok(Self {
            bound_l2: global_bound(tensors, &k),
            bound_h1: global_bound(tensors, &k_hat),
            k: k.k,
            k_hat: k_hat.k,
            per_index_k: k.per_index,
            observed_max_entry: check.observed_max_entry,
            gamma_fit: fit_gamma(&growth_samples),
            gamma_hat_fit: fit_gamma_hat(&growth_samples),
            growth_samples,
            seed,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "quantity,value")?;
        for (name, v) in [
            ("K", self.k),
            ("K_hat", self.k_hat),
            ("bound_l2", self.bound_l2),
            ("bound_h1", self.bound_h1),
            ("observed_max_entry", self.observed_max_entry),
            ("gamma_fit", self.gamma_fit),
            ("gamma_hat_fit", self.gamma_hat_fit),
        ] {
            writeln!(out, "{name},{}", fmt_float(v))?;
        }
        writeln!(out, "seed,{}", self.seed)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::quadrature_oracle;
    use crate::tensors::a_factor;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn empty_tensors_have_zero_constants() {
        let t = CouplingTensors::empty(BasisKind::SineSine, 3, 3);
        assert_eq!(compute_k(&t).k, 0.0);
        assert_eq!(compute_k_hat(&t).k, 0.0);
        assert!(compute_k(&t).argmax().is_none());
    }

    #[test]
    fn zero_velocity_is_within_bounds() {
        let t = CouplingTensors::build(3, 3).unwrap();
        let mat = assemble_advection(&t, &VelocityCoefficients::zeros(3)).unwrap();
        assert!(mat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn k_hat_below_k() {
        for n in 1..=4 {
            let t = CouplingTensors::build(n, n).unwrap();
            let (k, kh) = (compute_k(&t), compute_k_hat(&t));
            assert!(kh.k <= k.k);
            for (idx, v) in &kh.per_index {
                assert!(*v <= k.per_index[idx]);
            }
        }
    }

    // Rebuild K for N = M = 2 from quadrature of the raw triple products.
    #[test]
    fn k_matches_quadrature_rebuild() {
        use crate::integrals::TrigFactor as F;
        let t = CouplingTensors::build(2, 2).unwrap();
        let k = compute_k(&t);
        let mut best = 0.0f64;
        for m in 1..=2 {
            for n in 1..=2 {
                for i in 1..=2 {
                    for j in 1..=2 {
                        let (mut sa, mut sb) = (0.0, 0.0);
                        for kk in 1..=2 {
                            for l in 1..=2 {
                                let a = quadrature_oracle(&[F::sin(m), F::sin(kk), F::cos(i)], 64)
                                    * quadrature_oracle(&[F::sin(n), F::cos(l), F::sin(j)], 64);
                                let b = quadrature_oracle(&[F::sin(m), F::cos(kk), F::sin(i)], 64)
                                    * quadrature_oracle(&[F::sin(n), F::sin(l), F::cos(j)], 64);
                                sa += a * a;
                                sb += b * b;
                            }
                        }
                        let v = (i as f64 * sa.sqrt()).max(j as f64 * sb.sqrt());
                        assert!((v - k.get(m, n, i, j)).abs() < 1e-10);
                        best = best.max(v);
                    }
                }
            }
        }
        assert!((best - k.k).abs() < 1e-10);
        assert!(a_factor(BasisKind::SineSine, crate::tensors::Axis::X, 1, 1, 1).abs() < 1e-15);
    }

    #[test]
    fn no_violations_small() {
        let t = CouplingTensors::build(3, 3).unwrap();
        for c in [Constraint::L2Unit, Constraint::H1Unit] {
            let check = verify_entry_bounds(&t, 200, c, 3).unwrap();
            assert!(check.observed_max_entry <= check.bound);
            assert!(check.max_index_ratio <= 1.0);
        }
    }

    #[test]
    fn global_bound_matches_stated_form() {
        let t = CouplingTensors::build(3, 3).unwrap();
        let k = compute_k(&t);
        assert_relative_eq!(
            global_bound(&t, &k),
            8.0 * SQRT_2 * PI * k.k,
            max_relative = 1e-14
        );
    }

    #[test]
    fn alignment_attains_linear_maximum() {
        let t = CouplingTensors::build(3, 3).unwrap();
        let a = tightest_alignment(&t, Constraint::L2Unit).unwrap();
        assert!(Constraint::L2Unit.is_feasible(&a.vel, 1e-12));
        assert!(a.ratio() <= 1.0 + 1e-12);
        // no random draw beats the aligned velocity on this entry
        let modes = t.modes();
        let (m, n, i, j) = a.key;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v = Constraint::L2Unit.random_feasible(3, &mut rng);
            let mat = assemble_advection(&t, &v).unwrap();
            assert!(mat[(modes.index(m, n), modes.index(i, j))].abs() <= a.entry.abs() + 1e-12);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let t = CouplingTensors::build(2, 2).unwrap();
        assert!(verify_entry_bounds(&t, 0, Constraint::L2Unit, 0).is_err());
    }

    #[test]
    fn spread_of_constants() {
        assert_eq!(spread([1.0, 2.0, 4.0]), 4.0);
    }

    #[test]
    fn report_csv_rows() {
        let t = CouplingTensors::build(2, 2).unwrap();
        let r = BoundReport::build(&t, 10, Constraint::L2Unit, 7, &[2]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let names: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(
            names,
            ["quantity", "K", "K_hat", "bound_l2", "bound_h1", "observed_max_entry", "gamma_fit", "gamma_hat_fit", "seed"]
        );
        assert!(text.ends_with("seed,7\n"));
    }
}
