//! Composite Gauss–Legendre rules on intervals and on squares whose
//! integrand has a kink along the diagonal.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::C64;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|_| Error::pre(format!("Gauss-Legendre order {order} < 2")))?;
        Ok(Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.pairs
            .iter()
            .map(move |&(x, w)| (mid + half * x, half * w))
    }

    /// Composite rule over `panels` equal panels of [a, b].
    pub fn integrate_complex(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> C64) -> C64 {
        let h = (b - a) / panels as f64;
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..panels {
            let lo = a + h * p as f64;
            for (x, w) in self.mapped(lo, lo + h) {
                acc += f(x) * w;
            }
        }
        acc
    }
}

/// Integrates `f(x, y)` over [lo, hi]² split into `tiles`² equal tiles.
///
/// Diagonal tiles are split into two triangles, each covered by a collapsed
/// (Duffy) tensor rule, so kernels that are only piecewise smooth across
/// x = y keep full Gauss order. `skip(x_lo, x_hi, y_lo, y_hi)` may discard
/// off-diagonal tiles whose contribution is known to be negligible.
pub fn integrate_square<const N: usize, F, S>(
    rule: &GaussRule,
    lo: f64,
    hi: f64,
    tiles: usize,
    f: &F,
    skip: &S,
) -> [C64; N]
where
    F: Fn(f64, f64) -> [C64; N] + Sync,
    S: Fn(f64, f64, f64, f64) -> bool + Sync,
{
    let h = (hi - lo) / tiles as f64;
    let edge = |k: usize| if k == tiles { hi } else { lo + h * k as f64 };
    let rows: Vec<[C64; N]> = (0..tiles)
        .into_par_iter()
        .map(|p| {
            let (xa, xb) = (edge(p), edge(p + 1));
            let mut acc = [C64::new(0.0, 0.0); N];
            for q in 0..tiles {
                let (ya, yb) = (edge(q), edge(q + 1));
                if p == q {
                    diagonal_tile(rule, xa, xb, f, &mut acc);
                } else if !skip(xa, xb, ya, yb) {
                    for (x, wx) in rule.mapped(xa, xb) {
                        for (y, wy) in rule.mapped(ya, yb) {
                            let v = f(x, y);
                            let w = wx * wy;
                            for (a, z) in acc.iter_mut().zip(v) {
                                *a += z * w;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = [C64::new(0.0, 0.0); N];
    for row in rows {
        for (t, z) in total.iter_mut().zip(row) {
            *t += z;
        }
    }
    total
}

fn diagonal_tile<const N: usize, F>(rule: &GaussRule, a: f64, b: f64, f: &F, acc: &mut [C64; N])
where
    F: Fn(f64, f64) -> [C64; N],
{
    let h = b - a;
    for (u, wu) in rule.mapped(0.0, 1.0) {
        for (v, wv) in rule.mapped(0.0, 1.0) {
            let w = wu * wv * h * h * u;
            let s = a + h * u;
            let r = a + h * u * v;
            // y ≤ x and x ≤ y halves
            let lower = f(s, r);
            let upper = f(r, s);
            for ((acc, l), up) in acc.iter_mut().zip(lower).zip(upper) {
                *acc += (l + up) * w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_rule_exact_on_polynomials() {
        let rule = GaussRule::new(4).unwrap();
        let v = rule.integrate_complex(0.0, 2.0, 3, |x| C64::new(x.powi(7), 0.0));
        assert!((v.re - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn kinked_kernel_on_square() {
        // ∫∫_[0,L]² e^{-|x-y|} = 2(L - 1 + e^{-L})
        let rule = GaussRule::new(8).unwrap();
        let l = 5.0;
        let f = |x: f64, y: f64| [C64::new((-(x - y).abs()).exp(), 0.0)];
        let v = integrate_square(&rule, 0.0, l, 5, &f, &|_, _, _, _| false);
        let exact = 2.0 * (l - 1.0 + (-l).exp());
        assert!(
            (v[0].re - exact).abs() < 1e-13 * exact,
            "{} vs {}",
            v[0].re,
            exact
        );
    }

    #[test]
    fn order_below_two_rejected() {
        assert!(GaussRule::new(1).is_err());
    }
}
