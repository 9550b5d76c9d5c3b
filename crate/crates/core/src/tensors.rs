//! Coupling tensors between velocity modes, scalar modes and test functions.
//!
//! For the sine basis
//!
//! ```text
//! A[m,n,k,l,i,j] = int sin(m pi x) sin(k pi x) cos(i pi x) dx * int sin(n pi y) cos(l pi y) sin(j pi y) dy
//! B[m,n,k,l,i,j] = int sin(m pi x) cos(k pi x) sin(i pi x) dx * int sin(n pi y) sin(l pi y) cos(j pi y) dy
//! ```
//!
//! and for the cosine basis the scalar factors `sin`/`cos` swap roles (the
//! test function and the scalar mode are cosines, their derivatives sines).

use std::collections::BTreeMap;
use std::io::Write;

use crate::basis::{BasisKind, ModeSet};
use crate::error::{Error, Result};
use crate::integrals::{integral_triple, TrigFactor};

/// Entries below this magnitude are not stored.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Default cap on `M^2 * (N')^4`, the number of index tuples visited.
pub const DEFAULT_ENTRY_BUDGET: u128 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorKey {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEntry {
    pub a: f64,
    pub b: f64,
}

/// Which 1-D integral of an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Sparse `A`/`B` coupling tensors for one basis and truncation.
#[derive(Debug, Clone)]
pub struct CouplingTensors {
    modes: ModeSet,
    velocity_modes: usize,
    entries: BTreeMap<TensorKey, CouplingEntry>,
}

/// The 1-D factor integrals making up `A` and `B`.
///
/// `A = a_factor(X, m, k, i) * a_factor(Y, n, l, j)` and likewise for `B`.
pub fn a_factor(basis: BasisKind, axis: Axis, test: usize, vel: usize, scalar: usize) -> f64 {
    let (t, s, ds) = factor_shapes(basis);
    match axis {
        // velocity v1 ~ sin(k pi x) cos(l pi y), multiplied by d/dx of the scalar mode
        Axis::X => integral_triple(t(test), TrigFactor::sin(vel), ds(scalar)),
        Axis::Y => integral_triple(t(test), TrigFactor::cos(vel), s(scalar)),
    }
}

pub fn b_factor(basis: BasisKind, axis: Axis, test: usize, vel: usize, scalar: usize) -> f64 {
    let (t, s, ds) = factor_shapes(basis);
    match axis {
        // velocity v2 ~ cos(k pi x) sin(l pi y), multiplied by d/dy of the scalar mode
        Axis::X => integral_triple(t(test), TrigFactor::cos(vel), s(scalar)),
        Axis::Y => integral_triple(t(test), TrigFactor::sin(vel), ds(scalar)),
    }
}

type Shape = fn(usize) -> TrigFactor;

/// (test function, scalar factor, shape of the scalar factor's derivative)
fn factor_shapes(basis: BasisKind) -> (Shape, Shape, Shape) {
    match basis {
        BasisKind::SineSine => (TrigFactor::sin, TrigFactor::sin, TrigFactor::cos),
        BasisKind::CosineCosine => (TrigFactor::cos, TrigFactor::cos, TrigFactor::sin),
    }
}

struct Table {
    dims: (usize, usize, usize),
    lo: usize,
    data: Vec<f64>,
}

impl Table {
    fn build(modes: ModeSet, m_vel: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let p = modes.per_axis();
        let lo = modes.basis.first_mode();
        let mut data = Vec::with_capacity(p * m_vel * p);
        for t in modes.axis() {
            for v in 1..=m_vel {
                for s in modes.axis() {
                    data.push(f(t, v, s));
                }
            }
        }
        Self {
            dims: (p, m_vel, p),
            lo,
            data,
        }
    }

    fn get(&self, t: usize, v: usize, s: usize) -> f64 {
        let (_, dv, ds) = self.dims;
        self.data[((t - self.lo) * dv + (v - 1)) * ds + (s - self.lo)]
    }
}

impl CouplingTensors {
    /// Builds the sine-basis tensors for scalar modes `1..=n` and velocity
    /// modes `1..=m`.
    pub fn build(n: usize, m: usize) -> Result<Self> {
        Self::build_for(BasisKind::SineSine, n, m, DEFAULT_ENTRY_BUDGET)
    }

    pub fn build_for(basis: BasisKind, n: usize, m: usize, budget: u128) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "mode counts must be positive (N={n}, M={m})"
            )));
        }
        let modes = ModeSet::new(basis, n);
        let p = modes.per_axis() as u128;
        let needed = (m as u128).pow(2) * p.pow(4);
        if needed > budget {
            return Err(Error::Capacity { needed, budget });
        }

        let xa = Table::build(modes, m, |t, v, s| a_factor(basis, Axis::X, t, v, s));
        let ya = Table::build(modes, m, |t, v, s| a_factor(basis, Axis::Y, t, v, s));
        let xb = Table::build(modes, m, |t, v, s| b_factor(basis, Axis::X, t, v, s));
        let yb = Table::build(modes, m, |t, v, s| b_factor(basis, Axis::Y, t, v, s));

        let mut entries = BTreeMap::new();
        for mi in modes.axis() {
            for ni in modes.axis() {
                for k in 1..=m {
                    for l in 1..=m {
                        for i in modes.axis() {
                            let (ax, bx) = (xa.get(mi, k, i), xb.get(mi, k, i));
                            if ax == 0.0 && bx == 0.0 {
                                continue;
                            }
                            for j in modes.axis() {
                                let mut a = ax * ya.get(ni, l, j);
                                let mut b = bx * yb.get(ni, l, j);
                                if a.abs() < DROP_THRESHOLD {
                                    a = 0.0;
                                }
                                if b.abs() < DROP_THRESHOLD {
                                    b = 0.0;
                                }
                                if a != 0.0 || b != 0.0 {
                                    let key = TensorKey { m: mi, n: ni, k, l, i, j };
                                    entries.insert(key, CouplingEntry { a, b });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            modes,
            velocity_modes: m,
            entries,
        })
    }

    /// A tensor with no stored entries.
    pub fn empty(basis: BasisKind, n: usize, m: usize) -> Self {
        Self {
            modes: ModeSet::new(basis, n),
            velocity_modes: m,
            entries: BTreeMap::new(),
        }
    }

    pub fn basis(&self) -> BasisKind {
        self.modes.basis
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    /// Highest scalar mode `N`.
    pub fn n(&self) -> usize {
        self.modes.n_max
    }

    /// Velocity mode count `M`.
    pub fn m(&self) -> usize {
        self.velocity_modes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &TensorKey) -> Option<CouplingEntry> {
        self.entries.get(key).copied()
    }

    /// `A` at `key`, zero when not stored.
    pub fn a(&self, key: &TensorKey) -> f64 {
        self.get(key).map_or(0.0, |e| e.a)
    }

    pub fn b(&self, key: &TensorKey) -> f64 {
        self.get(key).map_or(0.0, |e| e.b)
    }

    /// Stored entries in lexicographic `(m, n, k, l, i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&TensorKey, &CouplingEntry)> {
        self.entries.iter()
    }

    /// Total number of index tuples `M^2 (N')^4`.
    pub fn total_slots(&self) -> usize {
        self.velocity_modes.pow(2) * self.modes.len().pow(2)
    }

    /// Fraction of index tuples with a nonzero `A` entry.
    pub fn a_fill_fraction(&self) -> f64 {
        let nnz = self.entries.values().filter(|e| e.a != 0.0).count();
        nnz as f64 / self.total_slots() as f64
    }

    /// Inserts an entry directly. Test and FFI helper.
    pub fn insert(&mut self, key: TensorKey, entry: CouplingEntry) {
        self.entries.insert(key, entry);
    }

    /// CSV dump `m,n,k,l,i,j,A,B`, one row per stored entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,n,k,l,i,j,A,B")?;
        for (key, e) in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                key.m,
                key.n,
                key.k,
                key.l,
                key.i,
                key.j,
                crate::fmt_float(e.a),
                crate::fmt_float(e.b)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::{quadrature_oracle, TrigFactor as F};

    #[test]
    fn smallest_case_vanishes() {
        let t = CouplingTensors::build(1, 1).unwrap();
        let key = TensorKey { m: 1, n: 1, k: 1, l: 1, i: 1, j: 1 };
        assert_eq!(t.a(&key), 0.0);
        let x = quadrature_oracle(&[F::sin(1), F::sin(1), F::cos(1)], 64);
        let y = quadrature_oracle(&[F::sin(1), F::cos(1), F::sin(1)], 64);
        assert!(x.abs() < 1e-14 && y.abs() < 1e-14);
    }

    #[test]
    fn capacity_error() {
        let err = CouplingTensors::build_for(BasisKind::SineSine, 10, 10, 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(CouplingTensors::build(0, 2).is_err());
    }

    #[test]
    fn x_parity_selection_rule() {
        // sin(m) sin(k) cos(i) expands into cosines of m-k+-i and m+k+-i; only a
        // zero frequency survives integration, which needs m+k+i even. Odd sums vanish.
        for m in 1..=6 {
            for k in 1..=6 {
                for i in 1..=6 {
                    let q = quadrature_oracle(&[F::sin(m), F::sin(k), F::cos(i)], 64);
                    if (m + k + i) % 2 == 1 {
                        assert!(q.abs() < 1e-13, "m={m} k={k} i={i}: {q}");
                    }
                }
            }
        }
        let t = CouplingTensors::build(2, 2).unwrap();
        for (key, e) in t.iter() {
            if (key.m + key.k + key.i) % 2 == 1 {
                assert_eq!(e.a, 0.0, "{key:?}");
            }
        }
    }

    #[test]
    fn entries_factorize() {
        let t = CouplingTensors::build(3, 3).unwrap();
        for (key, e) in t.iter() {
            let a = a_factor(BasisKind::SineSine, Axis::X, key.m, key.k, key.i)
                * a_factor(BasisKind::SineSine, Axis::Y, key.n, key.l, key.j);
            let b = b_factor(BasisKind::SineSine, Axis::X, key.m, key.k, key.i)
                * b_factor(BasisKind::SineSine, Axis::Y, key.n, key.l, key.j);
            assert_eq!(e.a, if a.abs() < DROP_THRESHOLD { 0.0 } else { a });
            assert_eq!(e.b, if b.abs() < DROP_THRESHOLD { 0.0 } else { b });
            assert!(e.a.is_finite() && e.b.is_finite());
        }
    }

    #[test]
    fn sparsity_at_four_modes() {
        let t = CouplingTensors::build(4, 4).unwrap();
        let frac = t.a_fill_fraction();
        assert!(frac < 0.2, "fill fraction {frac}");
        // regression value from an independent brute-force scan: 324 of 4096 slots
        assert_eq!(t.iter().filter(|(_, e)| e.a != 0.0).count(), 324);
    }

    #[test]
    fn csv_is_sorted_and_formatted() {
        let t = CouplingTensors::build(2, 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("m,n,k,l,i,j,A,B"));
        let keys: Vec<Vec<usize>> = lines
            .map(|l| l.split(',').take(6).map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(keys.len(), t.len());
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
