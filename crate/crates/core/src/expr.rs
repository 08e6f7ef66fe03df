//! Closed catalog of scalar expressions with analytic gradients.
//!
//! Maps, forms and scenario formulas are assembled from these nodes; there is no
//! general expression language.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarExpr {
    Const(f64),
    Coord(usize),
    /// `coef * Π x_i^{powers[i]}`.
    Monomial {
        coef: f64,
        powers: Vec<u32>,
    },
    /// `e^{-1/x²}` (even) or `sign(x) e^{-1/x²}` (odd), extended by 0 at the origin.
    Profile {
        axis: usize,
        odd: bool,
    },
    Sin {
        axis: usize,
        freq: f64,
    },
    Cos {
        axis: usize,
        freq: f64,
    },
    Scale(f64, Box<ScalarExpr>),
    Sum(Vec<ScalarExpr>),
    Prod(Vec<ScalarExpr>),
}

fn profile(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (-1.0 / (t * t)).exp()
    }
}

fn profile_derivative(t: f64) -> f64 {
    let e = profile(t);
    if e == 0.0 {
        0.0
    } else {
        2.0 * e / (t * t * t)
    }
}

impl ScalarExpr {
    pub fn coord(i: usize) -> Self {
        ScalarExpr::Coord(i)
    }

    pub fn constant(c: f64) -> Self {
        ScalarExpr::Const(c)
    }

    pub fn scale(c: f64, e: ScalarExpr) -> Self {
        ScalarExpr::Scale(c, Box::new(e))
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_axis(&self) -> Option<usize> {
        match self {
            ScalarExpr::Const(_) => None,
            ScalarExpr::Coord(i) => Some(*i),
            ScalarExpr::Monomial { powers, .. } => powers.iter().rposition(|&p| p > 0),
            ScalarExpr::Profile { axis, .. }
            | ScalarExpr::Sin { axis, .. }
            | ScalarExpr::Cos { axis, .. } => Some(*axis),
            ScalarExpr::Scale(_, e) => e.max_axis(),
            ScalarExpr::Sum(es) | ScalarExpr::Prod(es) => {
                es.iter().filter_map(|e| e.max_axis()).max()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarExpr::Const(c) => *c,
            ScalarExpr::Coord(i) => x[*i],
            ScalarExpr::Monomial { coef, powers } => powers
                .iter()
                .enumerate()
                .fold(*coef, |acc, (i, &p)| acc * x[i].powi(p as i32)),
            ScalarExpr::Profile { axis, odd } => {
                let t = x[*axis];
                let v = profile(t);
                if *odd && t < 0.0 {
                    -v
                } else {
                    v
                }
            }
            ScalarExpr::Sin { axis, freq } => (freq * x[*axis]).sin(),
            ScalarExpr::Cos { axis, freq } => (freq * x[*axis]).cos(),
            ScalarExpr::Scale(c, e) => c * e.eval(x),
            ScalarExpr::Sum(es) => es.iter().map(|e| e.eval(x)).sum(),
            ScalarExpr::Prod(es) => es.iter().map(|e| e.eval(x)).product(),
        }
    }

    /// Analytic gradient with respect to all `x.len()` coordinates.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut g = vec![0.0; n];
        match self {
            ScalarExpr::Const(_) => {}
            ScalarExpr::Coord(i) => g[*i] = 1.0,
            ScalarExpr::Monomial { coef, powers } => {
                for (j, &pj) in powers.iter().enumerate() {
                    if pj == 0 {
                        continue;
                    }
                    let mut v = *coef * pj as f64;
                    for (i, &p) in powers.iter().enumerate() {
                        let e = if i == j { p - 1 } else { p };
                        v *= x[i].powi(e as i32);
                    }
                    g[j] = v;
                }
            }
            ScalarExpr::Profile { axis, odd } => {
                let t = x[*axis];
                // odd: d/dt sign(t)e^{-1/t²} = 2|t|^{-3}e^{-1/t²}
                let d = profile_derivative(t);
                g[*axis] = if *odd { d.abs() } else { d };
            }
            ScalarExpr::Sin { axis, freq } => g[*axis] = freq * (freq * x[*axis]).cos(),
            ScalarExpr::Cos { axis, freq } => g[*axis] = -freq * (freq * x[*axis]).sin(),
            ScalarExpr::Scale(c, e) => {
                for (gi, ei) in g.iter_mut().zip(e.grad(x)) {
                    *gi = c * ei;
                }
            }
            ScalarExpr::Sum(es) => {
                for e in es {
                    for (gi, ei) in g.iter_mut().zip(e.grad(x)) {
                        *gi += ei;
                    }
                }
            }
            ScalarExpr::Prod(es) => {
                let vals: Vec<f64> = es.iter().map(|e| e.eval(x)).collect();
                for (k, e) in es.iter().enumerate() {
                    let others: f64 = vals
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, v)| v)
                        .product();
                    for (gi, ei) in g.iter_mut().zip(e.grad(x)) {
                        *gi += others * ei;
                    }
                }
            }
        }
        g
    }
}

/// Named closed-form maps `ℝⁿ → ℝᵐ`, one expression per output component.
pub mod catalog {
    use super::ScalarExpr;

    /// `τ ↦ −e^{−1/τ²}` for `τ<0`, `0` at `0`, `e^{−1/τ²}` for `τ>0`.
    pub fn odd_profile() -> Vec<ScalarExpr> {
        vec![ScalarExpr::Profile { axis: 0, odd: true }]
    }

    /// `τ ↦ −e^{−1/τ²}`, `0` at `0`.
    pub fn negated_profile() -> Vec<ScalarExpr> {
        vec![ScalarExpr::scale(
            -1.0,
            ScalarExpr::Profile {
                axis: 0,
                odd: false,
            },
        )]
    }

    pub fn profile() -> Vec<ScalarExpr> {
        vec![ScalarExpr::Profile {
            axis: 0,
            odd: false,
        }]
    }

    pub fn identity(dim: usize) -> Vec<ScalarExpr> {
        (0..dim).map(ScalarExpr::Coord).collect()
    }

    pub fn constant(value: &[f64]) -> Vec<ScalarExpr> {
        value.iter().map(|&c| ScalarExpr::Const(c)).collect()
    }

    pub fn square() -> Vec<ScalarExpr> {
        vec![ScalarExpr::Monomial {
            coef: 1.0,
            powers: vec![2],
        }]
    }

    /// `τ ↦ r(cos τ, sin τ)`.
    pub fn circle(radius: f64) -> Vec<ScalarExpr> {
        vec![
            ScalarExpr::scale(radius, ScalarExpr::Cos { axis: 0, freq: 1.0 }),
            ScalarExpr::scale(radius, ScalarExpr::Sin { axis: 0, freq: 1.0 }),
        ]
    }

    /// `x ↦ A x + b` for a row-major `A`.
    pub fn affine(rows: &[Vec<f64>], offset: &[f64]) -> Vec<ScalarExpr> {
        rows.iter()
            .zip(offset)
            .map(|(row, &b)| {
                let mut terms = vec![ScalarExpr::Const(b)];
                terms.extend(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &a)| a != 0.0)
                        .map(|(i, &a)| ScalarExpr::scale(a, ScalarExpr::Coord(i))),
                );
                ScalarExpr::Sum(terms)
            })
            .collect()
    }

    /// Look up a parameterless catalog map by name for the given source dimension.
    pub fn by_name(name: &str, dim: usize) -> Option<Vec<ScalarExpr>> {
        Some(match name {
            "identity" | "inclusion" => identity(dim),
            "odd_profile" | "p1" => odd_profile(),
            "negated_profile" | "p2" => negated_profile(),
            "profile" => profile(),
            "square" => square(),
            "circle" => circle(1.0),
            _ => return None,
        })
    }
}
