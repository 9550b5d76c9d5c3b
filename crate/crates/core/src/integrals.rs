//! Closed-form integrals of trigonometric products on `[0, 1]` and a
//! Gauss-Legendre oracle for checking them.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrigFn {
    Sin,
    Cos,
}

/// One factor `f(p pi x)` of a product integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrigFactor {
    pub func: TrigFn,
    pub mode: usize,
}

impl TrigFactor {
    pub const fn sin(mode: usize) -> Self {
        Self { func: TrigFn::Sin, mode }
    }

    pub const fn cos(mode: usize) -> Self {
        Self { func: TrigFn::Cos, mode }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let arg = self.mode as f64 * PI * x;
        match self.func {
            TrigFn::Sin => arg.sin(),
            TrigFn::Cos => arg.cos(),
        }
    }
}

/// A term `coef * f(freq pi x)` with a signed integer frequency.
#[derive(Debug, Clone, Copy)]
struct Harmonic {
    coef: f64,
    func: TrigFn,
    freq: i64,
}

impl Harmonic {
    fn integral(&self) -> f64 {
        match (self.func, self.freq) {
            (TrigFn::Cos, 0) => self.coef,
            (TrigFn::Cos, _) => 0.0,
            (TrigFn::Sin, 0) => 0.0,
            (TrigFn::Sin, s) if s % 2 == 0 => 0.0,
            // int_0^1 sin(s pi x) dx = (1 - (-1)^s) / (s pi) = 2 / (s pi) for odd s
            (TrigFn::Sin, s) => self.coef * 2.0 / (s as f64 * PI),
        }
    }
}

/// `int_0^1 prod_k f_k(p_k pi x) dx` by repeated product-to-sum expansion.
///
/// Every term is integrated with an integer-frequency branch, so resonant
/// combinations (zero combined frequency) are exact and no limit is taken.
pub fn integral_product(factors: &[TrigFactor]) -> f64 {
    let mut terms = vec![Harmonic {
        coef: 1.0,
        func: TrigFn::Cos,
        freq: 0,
    }];
    for f in factors {
        let q = f.mode as i64;
        let mut next = Vec::with_capacity(terms.len() * 2);
        for t in &terms {
            let half = 0.5 * t.coef;
            let (s, d) = (t.freq + q, t.freq - q);
            match (t.func, f.func) {
                // cos a cos b = [cos(a-b) + cos(a+b)] / 2
                (TrigFn::Cos, TrigFn::Cos) => {
                    next.push(Harmonic { coef: half, func: TrigFn::Cos, freq: d });
                    next.push(Harmonic { coef: half, func: TrigFn::Cos, freq: s });
                }
                // sin a sin b = [cos(a-b) - cos(a+b)] / 2
                (TrigFn::Sin, TrigFn::Sin) => {
                    next.push(Harmonic { coef: half, func: TrigFn::Cos, freq: d });
                    next.push(Harmonic { coef: -half, func: TrigFn::Cos, freq: s });
                }
                // sin a cos b = [sin(a+b) + sin(a-b)] / 2
                (TrigFn::Sin, TrigFn::Cos) => {
                    next.push(Harmonic { coef: half, func: TrigFn::Sin, freq: s });
                    next.push(Harmonic { coef: half, func: TrigFn::Sin, freq: d });
                }
                // cos a sin b = [sin(a+b) - sin(a-b)] / 2
                (TrigFn::Cos, TrigFn::Sin) => {
                    next.push(Harmonic { coef: half, func: TrigFn::Sin, freq: s });
                    next.push(Harmonic { coef: -half, func: TrigFn::Sin, freq: d });
                }
            }
        }
        terms = next;
    }
    terms.iter().map(Harmonic::integral).sum()
}

/// `int_0^1 f1 f2 f3 dx` for three trigonometric factors.
pub fn integral_triple(f1: TrigFactor, f2: TrigFactor, f3: TrigFactor) -> f64 {
    integral_product(&[f1, f2, f3])
}

/// `int_0^1 sin(k pi x) cos(m pi x) dx`, the closed form used by the
/// fixed-flow example. Zero on the diagonal `k = m` (including `k = m = 0`).
pub fn integral_sin_cos(k: usize, m: usize) -> f64 {
    if k == m {
        return 0.0;
    }
    let (kf, mf) = (k as f64, m as f64);
    let cos_k = parity_sign(k);
    let cos_m = parity_sign(m);
    (kf - kf * cos_m * cos_k) / (PI * (kf * kf - mf * mf))
}

/// `int_0^1 sin(l pi y) sin(2 pi y) sin(n pi y) dy`.
///
/// Nonzero only when `l + n` is odd; in that case none of the factors
/// `(l - n +- 2)`, `(l + n +- 2)` in the denominator can vanish. When `l + n`
/// is even every harmonic in the product-to-sum expansion has even frequency
/// and integrates to zero, resonant terms included.
pub fn integral_sin_sin2_sin(l: usize, n: usize) -> f64 {
    if (l + n).is_multiple_of(2) {
        return 0.0;
    }
    let (lf, nf) = (l as f64, n as f64);
    let numer = 4.0 * lf * nf * (-1.0 + parity_sign(l) * parity_sign(n));
    let denom = (-2.0 + lf - nf) * (2.0 + lf - nf) * (-2.0 + lf + nf) * (2.0 + lf + nf) * PI;
    numer / denom
}

/// `cos(k pi)` evaluated exactly.
fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
pub struct UnitQuadrature {
    rule: GaussLegendre,
}

impl UnitQuadrature {
    /// Panics if `points < 2`.
    pub fn new(points: usize) -> Self {
        assert!(points >= 2, "quadrature needs at least 2 points");
        let degree = NonZeroUsize::new(points).expect("points >= 2");
        Self {
            rule: GaussLegendre::new(degree),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F) -> f64 {
        self.rule.integrate(0.0, 1.0, f)
    }

    /// Nodes and weights on `[0, 1]`.
    pub fn nodes_weights(&self) -> Vec<(f64, f64)> {
        self.rule
            .iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    }
}

/// Gauss-Legendre approximation of `int_0^1 prod f_k(p_k pi x) dx`.
pub fn quadrature_oracle(factors: &[TrigFactor], points: usize) -> f64 {
    UnitQuadrature::new(points).integrate(|x| factors.iter().map(|f| f.eval(x)).product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sin_cos_examples() {
        assert_abs_diff_eq!(integral_sin_cos(2, 1), 4.0 / (3.0 * PI), epsilon = 1e-15);
        assert_eq!(integral_sin_cos(3, 3), 0.0);
        assert_eq!(integral_sin_cos(0, 4), 0.0);
        let oracle = quadrature_oracle(&[TrigFactor::sin(1)], 64);
        assert_abs_diff_eq!(integral_sin_cos(1, 0), oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(integral_sin_cos(1, 0), 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn sin_cos_matches_product_expansion() {
        for k in 0..=12 {
            for m in 0..=12 {
                let closed = integral_sin_cos(k, m);
                let expanded = integral_product(&[TrigFactor::sin(k), TrigFactor::cos(m)]);
                assert_abs_diff_eq!(closed, expanded, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn triple_table_values() {
        // m = 0 row: int sin(0) sin(pi x) sin(i pi x) is zero for every i, since
        // sin(0) vanishes; the cosine-basis analogue cos(0) sin sin gives 1/2 at i = 1.
        let a = integral_triple(TrigFactor::cos(0), TrigFactor::sin(1), TrigFactor::sin(1));
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        let c = integral_triple(TrigFactor::cos(1), TrigFactor::cos(1), TrigFactor::cos(0));
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-15);
        let s = integral_triple(TrigFactor::sin(1), TrigFactor::sin(2), TrigFactor::sin(3));
        let q = quadrature_oracle(&[TrigFactor::sin(1), TrigFactor::sin(2), TrigFactor::sin(3)], 64);
        assert_abs_diff_eq!(s, q, epsilon = 1e-12);
    }

    #[test]
    fn oracle_basics() {
        assert_abs_diff_eq!(quadrature_oracle(&[TrigFactor::sin(1), TrigFactor::sin(1)], 64), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(quadrature_oracle(&[], 2), 1.0, epsilon = 1e-15);
        let f = [TrigFactor::sin(1), TrigFactor::cos(2), TrigFactor::sin(3)];
        assert_abs_diff_eq!(quadrature_oracle(&f, 64), integral_product(&f), epsilon = 1e-13);
    }

    #[test]
    fn triple_matches_quadrature_for_all_small_modes() {
        let quad = UnitQuadrature::new(64);
        let nodes = quad.nodes_weights();
        let fns = [TrigFn::Sin, TrigFn::Cos];
        for &f1 in &fns {
            for &f2 in &fns {
                for &f3 in &fns {
                    for p1 in 0..=8 {
                        for p2 in 0..=8 {
                            for p3 in 0..=8 {
                                let fs = [
                                    TrigFactor { func: f1, mode: p1 },
                                    TrigFactor { func: f2, mode: p2 },
                                    TrigFactor { func: f3, mode: p3 },
                                ];
                                let q: f64 = nodes
                                    .iter()
                                    .map(|&(x, w)| w * fs.iter().map(|f| f.eval(x)).product::<f64>())
                                    .sum();
                                let c = integral_triple(fs[0], fs[1], fs[2]);
                                assert!((c - q).abs() < 1e-12, "{fs:?}: closed {c} vs quad {q}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sin_sin2_sin_condition_is_odd_sum() {
        // Exhaustive check of the closed form, including the resonant
        // denominators, against the quadrature oracle.
        for l in 0..=8 {
            for n in 0..=8 {
                let q = quadrature_oracle(&[TrigFactor::sin(l), TrigFactor::sin(2), TrigFactor::sin(n)], 64);
                let c = integral_sin_sin2_sin(l, n);
                assert!((c - q).abs() < 1e-12, "l={l} n={n}: {c} vs {q}");
                if (l + n).is_multiple_of(2) {
                    assert!(q.abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn triple_symmetric_in_like_factors(a in 0usize..20, b in 0usize..20, c in 0usize..20) {
            let s1 = integral_triple(TrigFactor::sin(a), TrigFactor::sin(b), TrigFactor::cos(c));
            let s2 = integral_triple(TrigFactor::sin(b), TrigFactor::sin(a), TrigFactor::cos(c));
            prop_assert!((s1 - s2).abs() < 1e-15);
            let c1 = integral_triple(TrigFactor::cos(a), TrigFactor::cos(b), TrigFactor::sin(c));
            let c2 = integral_triple(TrigFactor::cos(b), TrigFactor::cos(a), TrigFactor::sin(c));
            prop_assert!((c1 - c2).abs() < 1e-15);
        }
    }
}
