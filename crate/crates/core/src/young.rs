//! Young functions, their complementary functions and the `B_p` Dini test.
//!
//! Every family is normalised so that `Φ(1) = 1`, except complementary
//! functions, which are the plain Legendre transform of a normalised `Φ`
//! (the transform of `t²` is `s²/4`, so `Ψ(1) = 1/4`).

use std::f64::consts::E;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, golden_max, log_grid};

/// Log-spaced samples per decade used by the sampled Δ₂ and convexity checks.
pub const SAMPLES_PER_DECADE: usize = 256;
/// Absolute bound on the neglected tail of the numeric Dini integrals.
pub const TAIL_TOL: f64 = 1e-10;
/// Relative tolerance of the numeric Legendre transform.
pub const CONJUGATE_RTOL: f64 = 1e-10;

/// Serializable description of a Young function, as found in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum YoungSpec {
    Power {
        a: f64,
    },
    PowerLog {
        a: f64,
        b: f64,
    },
    ConjugateOf {
        of: Box<YoungSpec>,
    },
    Table {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone)]
enum Family {
    Power { a: f64 },
    PowerLog { a: f64, b: f64, scale: f64 },
    Conjugate(Arc<YoungFunction>),
    /// Piecewise linear through `knots`, starting at the origin; extended
    /// linearly past the last knot.
    Table { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone)]
pub struct YoungFunction {
    family: Family,
}

/// Outcome of the `B_p` test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BpCheck {
    /// `∫_c^∞ Φ(t)/t^p dt/t`, `+∞` when divergent.
    pub integral: f64,
    pub delta2: f64,
    pub member: bool,
}

impl YoungFunction {
    pub fn power(a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 1.0) {
            return Err(Error::Domain(format!("power exponent must be >= 1, got {a}")));
        }
        Ok(Self {
            family: Family::Power { a },
        })
    }

    /// `t^a log(e + t)^b / log(e + 1)^b`.
    pub fn power_log(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 1.0) {
            return Err(Error::Domain(format!("power-log exponent a must be >= 1, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::Domain(format!("power-log exponent b must be >= 0, got {b}")));
        }
        let scale = (E + 1.0).ln().powf(-b);
        Ok(Self {
            family: Family::PowerLog { a, b, scale },
        })
    }

    /// Convex piecewise-linear function through `points`, rescaled so the
    /// value at 1 is 1.
    pub fn table(points: &[[f64; 2]]) -> Result<Self> {
        let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for &[t, y] in points {
            if !(t.is_finite() && y.is_finite() && t >= 0.0 && y >= 0.0) {
                return Err(Error::Domain(format!("table point ({t}, {y}) is not a finite nonnegative pair")));
            }
            if t == 0.0 {
                if y != 0.0 {
                    return Err(Error::Domain("table must satisfy Φ(0) = 0".into()));
                }
                continue;
            }
            if t <= knots.last().unwrap().0 {
                return Err(Error::Domain("table abscissae must be strictly increasing".into()));
            }
            knots.push((t, y));
        }
        if knots.len() < 2 {
            return Err(Error::Domain("table needs at least one point with t > 0".into()));
        }
        let slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        if slopes.windows(2).any(|s| s[1] < s[0] * (1.0 - 1e-12)) {
            return Err(Error::Domain("table is not convex".into()));
        }
        if *slopes.last().unwrap() <= 0.0 {
            return Err(Error::Domain("table must be eventually increasing".into()));
        }
        let raw = Self {
            family: Family::Table { knots: knots.clone() },
        };
        let at_one = raw.value(1.0);
        if at_one <= 0.0 {
            return Err(Error::Domain("table vanishes at 1 and cannot be normalised".into()));
        }
        let knots = knots.into_iter().map(|(t, y)| (t, y / at_one)).collect();
        Ok(Self {
            family: Family::Table { knots },
        })
    }

    pub fn from_spec(spec: &YoungSpec) -> Result<Self> {
        let wrap = |e: Error, key: &str| match e {
            Error::Domain(m) => Error::config(key, m),
            other => other,
        };
        match spec {
            YoungSpec::Power { a } => Self::power(*a).map_err(|e| wrap(e, "a")),
            YoungSpec::PowerLog { a, b } => Self::power_log(*a, *b).map_err(|e| wrap(e, "a/b")),
            YoungSpec::ConjugateOf { of } => Ok(Self::from_spec(of)?.conjugate()),
            YoungSpec::Table { points } => Self::table(points).map_err(|e| wrap(e, "points")),
        }
    }

    pub fn spec(&self) -> YoungSpec {
        match &self.family {
            Family::Power { a } => YoungSpec::Power { a: *a },
            Family::PowerLog { a, b, .. } => YoungSpec::PowerLog { a: *a, b: *b },
            Family::Conjugate(inner) => YoungSpec::ConjugateOf {
                of: Box::new(inner.spec()),
            },
            Family::Table { knots } => YoungSpec::Table {
                points: knots.iter().skip(1).map(|&(t, y)| [t, y]).collect(),
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            Family::Power { a } => format!("power(a={a})"),
            Family::PowerLog { a, b, .. } => format!("power_log(a={a},b={b})"),
            Family::Conjugate(inner) => format!("conjugate_of({})", inner.label()),
            Family::Table { knots } => format!("table({} knots)", knots.len() - 1),
        }
    }

    /// Exponent `a` when this is the pure power `t^a`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::Power { a } => Some(a),
            _ => None,
        }
    }

    /// `Φ(t)`; rejects negative or non-finite arguments.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("Young function argument must be finite and >= 0, got {t}")));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation for hot loops; `t` must be finite and nonnegative.
    /// Complementary functions may return `+∞`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match &self.family {
            Family::Power { a } => power(t, *a),
            Family::PowerLog { a, b, scale } => {
                if t == 0.0 {
                    0.0
                } else {
                    power(t, *a) * (E + t).ln().powf(*b) * scale
                }
            }
            Family::Table { knots } => table_value(knots, t),
            Family::Conjugate(inner) => inner.legendre(t),
        }
    }

    /// `sup_t {ts − Φ(t)}`.
    fn legendre(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        if let Family::Power { a } = self.family {
            if a == 1.0 {
                return if s <= 1.0 { 0.0 } else { f64::INFINITY };
            }
            return (1.0 - 1.0 / a) * s * (s / a).powf(1.0 / (a - 1.0));
        }
        let h = |t: f64| {
            let v = self.value(t);
            if v.is_finite() {
                t * s - v
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut t = 1.0_f64;
        if h(2.0 * t) > h(t) {
            while h(2.0 * t) > h(t) {
                t *= 2.0;
                if t > 1e300 {
                    return f64::INFINITY;
                }
            }
        } else {
            while t > 1e-300 && h(0.5 * t) >= h(t) {
                t *= 0.5;
            }
        }
        let (_, best) = golden_max(&h, 0.5 * t, 2.0 * t, CONJUGATE_RTOL);
        best.max(0.0)
    }

    /// Complementary function `Ψ(s) = sup_t {ts − Φ(t)}`. Closed form for
    /// powers; otherwise evaluated pointwise by a numeric sup.
    pub fn conjugate(&self) -> YoungFunction {
        YoungFunction {
            family: Family::Conjugate(Arc::new(self.clone())),
        }
    }

    /// Generalised inverse `sup{t : Φ(t) ≤ y}` by bisection with geometric
    /// bracket growth.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::Domain(format!("inverse argument must be finite and >= 0, got {y}")));
        }
        Ok(self.inverse_unchecked(y))
    }

    pub(crate) fn inverse_unchecked(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        if let Family::Power { a } = self.family {
            return if a == 1.0 { y } else { y.powf(1.0 / a) };
        }
        // Invariant: value(lo) <= y < value(hi).
        let mut hi = 1.0_f64;
        if self.value(hi) <= y {
            while self.value(hi) <= y {
                hi *= 2.0;
                if !hi.is_finite() {
                    return f64::MAX;
                }
            }
        } else {
            while hi > f64::MIN_POSITIVE && self.value(0.5 * hi) > y {
                hi *= 0.5;
            }
        }
        let mut lo = 0.5 * hi;
        if self.value(lo) > y {
            return 0.0;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Sampled Δ₂ constant: sup of `Φ(2t)/Φ(t)` over `samples` log-spaced
    /// points in `[t_max·1e-12, t_max]`, skipping points with `Φ(t) = 0`.
    pub fn delta2_constant(&self, t_max: f64, samples: usize) -> Result<f64> {
        if !(t_max.is_finite() && t_max > 0.0) || samples < 2 {
            return Err(Error::Domain("delta2 needs t_max > 0 and at least 2 samples".into()));
        }
        let mut worst = 0.0_f64;
        for t in log_grid(t_max * 1e-12, t_max, samples) {
            let base = self.value(t);
            if base > 0.0 && base.is_finite() {
                let ratio = self.value(2.0 * t) / base;
                worst = worst.max(ratio);
            }
        }
        Ok(worst)
    }

    /// Δ₂ constant on the default grid: 256 points per decade over 12 decades.
    pub fn delta2_default(&self, t_max: f64) -> f64 {
        self.delta2_constant(t_max, 12 * SAMPLES_PER_DECADE + 1)
            .unwrap_or(f64::INFINITY)
    }

    /// `∫_c^∞ Φ(t)/t^p dt/t`, closed form where available.
    pub fn dini_integral(&self, p: f64, c: f64) -> f64 {
        match &self.family {
            Family::Power { a } => {
                if *a < p {
                    c.powf(a - p) / (p - a)
                } else {
                    f64::INFINITY
                }
            }
            Family::Conjugate(inner) => match inner.family {
                Family::Power { a } if a > 1.0 => {
                    let ap = a / (a - 1.0);
                    if ap < p {
                        conjugate_power_coefficient(a) * c.powf(ap - p) / (p - ap)
                    } else {
                        f64::INFINITY
                    }
                }
                Family::Power { .. } => f64::INFINITY,
                _ => tail_integral(&|t| self.value(t) * t.powf(-p), c),
            },
            Family::Table { knots } => table_dini(knots, p, c),
            Family::PowerLog { .. } => tail_integral(&|t| self.value(t) * t.powf(-p), c),
        }
    }

    /// `∫_c^∞ (t^{p'}/Ψ(t))^{p−1} dt/t` where `Ψ` is the complementary
    /// function of `self`.
    pub fn conjugate_dini_integral(&self, p: f64, c: f64) -> f64 {
        let pp = p / (p - 1.0);
        if let Family::Power { a } = self.family {
            if a > 1.0 {
                let ap = a / (a - 1.0);
                let e = (pp - ap) * (p - 1.0);
                let k = conjugate_power_coefficient(a);
                return if e < 0.0 {
                    k.powf(1.0 - p) * c.powf(e) / (-e)
                } else {
                    f64::INFINITY
                };
            }
        }
        let psi = self.conjugate();
        tail_integral(
            &|t| {
                let v = psi.value(t);
                if v == 0.0 {
                    f64::INFINITY
                } else {
                    (t.powf(pp) / v).powf(p - 1.0)
                }
            },
            c,
        )
    }

    /// Membership in `B_p`: finite Dini integral from `c` and finite sampled Δ₂.
    pub fn bp_check(&self, p: f64, c: f64) -> Result<BpCheck> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("B_p needs p > 1, got {p}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("B_p needs c > 0, got {c}")));
        }
        let integral = self.dini_integral(p, c);
        let delta2 = self.delta2_default(1e6);
        Ok(BpCheck {
            integral,
            delta2,
            member: integral.is_finite() && delta2.is_finite(),
        })
    }
}

#[inline]
fn power(t: f64, a: f64) -> f64 {
    if a == 1.0 {
        t
    } else if a == 2.0 {
        t * t
    } else if a == 3.0 {
        t * t * t
    } else {
        t.powf(a)
    }
}

/// `Ψ(s) = k s^{a'}` for `Φ(t) = t^a`.
fn conjugate_power_coefficient(a: f64) -> f64 {
    (1.0 - 1.0 / a) * a.powf(-1.0 / (a - 1.0))
}

fn table_value(knots: &[(f64, f64)], t: f64) -> f64 {
    let idx = knots.partition_point(|&(x, _)| x <= t);
    let (i0, i1) = if idx >= knots.len() {
        (knots.len() - 2, knots.len() - 1)
    } else {
        (idx - 1, idx)
    };
    let (x0, y0) = knots[i0];
    let (x1, y1) = knots[i1];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

fn table_dini(knots: &[(f64, f64)], p: f64, c: f64) -> f64 {
    // Antiderivative of (αt + β) t^{-p-1}.
    let piece = |alpha: f64, beta: f64, t: f64| alpha * t.powf(1.0 - p) / (1.0 - p) - beta * t.powf(-p) / p;
    let mut total = 0.0;
    let n = knots.len();
    for i in 0..n - 1 {
        let (x0, y0) = knots[i];
        let (x1, y1) = knots[i + 1];
        let alpha = (y1 - y0) / (x1 - x0);
        let beta = y0 - alpha * x0;
        let lo = x0.max(c);
        let hi = if i + 2 == n { f64::INFINITY } else { x1 };
        if hi <= lo {
            continue;
        }
        let upper = if hi.is_infinite() { 0.0 } else { piece(alpha, beta, hi) };
        total += upper - piece(alpha, beta, lo);
    }
    total
}

/// `∫_c^∞ g(t) dt/t` in the variable `u = ln t`, integrated in unit chunks
/// until the tail bound `h(U)/σ` drops below [`TAIL_TOL`], where `σ` is the
/// local logarithmic decay rate of the integrand.
fn tail_integral<G: Fn(f64) -> f64>(g: &G, c: f64) -> f64 {
    let h = |u: f64| g(u.exp());
    let u0 = c.ln();
    let mut total = 0.0;
    let mut u = u0;
    while u < u0 + 745.0 {
        let chunk = adaptive_simpson(&h, u, u + 1.0, 1e-14);
        if !chunk.is_finite() {
            return f64::INFINITY;
        }
        total += chunk;
        u += 1.0;
        let (here, before) = (h(u), h(u - 0.25));
        if !(here.is_finite() && before.is_finite()) {
            return f64::INFINITY;
        }
        if here == 0.0 {
            return total;
        }
        let decay = (before.ln() - here.ln()) / 0.25;
        if decay > 0.0 && here / decay < TAIL_TOL {
            return total;
        }
    }
    f64::INFINITY
}

impl TryFrom<&YoungSpec> for YoungFunction {
    type Error = Error;
    fn try_from(spec: &YoungSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}
