//! Békollè–Bonami constants, the `B_∞` functional, α-doubling diagnostics
//! and the closed-form power weights `y^s`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{alpha_measure, CellId, Interval, IntervalFamily, Region, Tessellation};
use crate::numeric::CompensatedSum;

/// A weight together with what is known about it in closed form.
#[derive(Debug, Clone)]
pub struct WeightDescriptor {
    pub field: GridField,
    /// Exponent `s` when the weight is `y^s`.
    pub power: Option<f64>,
    /// Predicted `[ω]_{B_{p,α}}` and the `(p, α)` it was predicted for;
    /// `None` inside means "not in class".
    pub predicted: Option<(f64, f64, Option<f64>)>,
}

/// Supremum of a box functional over a family, with the maximising box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantReport {
    pub constant: f64,
    pub witness: Option<Interval>,
    pub family_size: usize,
}

impl WeightDescriptor {
    /// Wraps a field after checking that it is positive on every cell.
    pub fn new(field: GridField) -> Result<Self> {
        if let Some(v) = field.values() {
            if let Some(c) = v.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Nondegeneracy { cell: c });
            }
        }
        let power = field.power_exponent();
        Ok(Self {
            field,
            power,
            predicted: None,
        })
    }

    pub fn tessellation(&self) -> &Arc<Tessellation> {
        self.field.tessellation()
    }
}

/// Closed-form `[y^s]_{B_{p,α}} = (α+1)^p / ((s+α+1)(s(1−p')+α+1)^{p−1})`,
/// `None` outside `−(α+1) < s < (α+1)(p−1)`.
pub fn predicted_power_constant(s: f64, alpha: f64, p: f64) -> Option<f64> {
    let pp = p / (p - 1.0);
    let first = s + alpha + 1.0;
    let dual = s * (1.0 - pp) + alpha + 1.0;
    (first > 0.0 && dual > 0.0).then(|| (alpha + 1.0).powf(p) / (first * dual.powf(p - 1.0)))
}

/// The weight `y^s` with exact cell masses and its predicted constant.
pub fn power_weight(tess: Arc<Tessellation>, s: f64, alpha: f64, p: f64) -> Result<WeightDescriptor> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("power_weight prediction needs p > 1, got {p}")));
    }
    let field = GridField::power_y(tess, s, 1.0)?;
    Ok(WeightDescriptor {
        field,
        power: Some(s),
        predicted: Some((p, alpha, predicted_power_constant(s, alpha, p))),
    })
}

fn carleson_measure(q: &Interval, alpha: f64) -> f64 {
    q.len().powf(alpha + 2.0) / (alpha + 1.0)
}

fn sup_over(values: Vec<f64>, boxes: &[Interval]) -> ConstantReport {
    let mut best = ConstantReport {
        constant: 0.0,
        witness: None,
        family_size: boxes.len(),
    };
    for (v, q) in values.into_iter().zip(boxes) {
        if v > best.constant || (v.is_nan() && best.witness.is_none()) {
            best.constant = v;
            best.witness = Some(*q);
        }
    }
    best
}

/// `[ω]_{B_{p,α}}` over the family; `p = 1` uses the cell-wise essential
/// infimum of `ω` on `Q_I`.
pub fn bekolle_constant(w: &WeightDescriptor, p: f64, alpha: f64, family: IntervalFamily) -> Result<ConstantReport> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("Békollè–Bonami exponent must be >= 1, got {p}")));
    }
    let tess = w.tessellation();
    let boxes = tess.family(family);
    if boxes.is_empty() {
        return Err(Error::Usage("empty interval family".into()));
    }
    let values: Vec<f64> = if p == 1.0 {
        boxes
            .par_iter()
            .map(|q| {
                let avg = w.field.box_mass(alpha, q)? / carleson_measure(q, alpha);
                Ok(avg / ess_inf(&w.field, q))
            })
            .collect::<Result<_>>()?
    } else {
        let dual = w.field.powf(1.0 - p / (p - 1.0))?;
        boxes
            .par_iter()
            .map(|q| {
                let m = carleson_measure(q, alpha);
                let a = w.field.box_mass(alpha, q)? / m;
                let b = dual.box_mass(alpha, q)? / m;
                Ok(a * b.powf(p - 1.0))
            })
            .collect::<Result<_>>()?
    };
    Ok(sup_over(values, &boxes))
}

/// Essential infimum of `ω` over `Q_I` at cell granularity.
fn ess_inf(w: &GridField, q: &Interval) -> f64 {
    let tess = w.tessellation();
    let mut best = f64::INFINITY;
    match (w.values(), w.power_params()) {
        (Some(v), _) => tess.for_each_overlap(q, |o| best = best.min(v[o.cell])),
        (None, Some((s, scale))) => {
            tess.for_each_overlap(q, |o| {
                let y = if s >= 0.0 { o.y0 } else { o.y1 };
                best = best.min(scale * y.powf(s));
            })
        }
        (None, None) => unreachable!("analytic fields carry an exponent"),
    }
    best
}

/// `B_∞` functional `sup_I (1/|Q_I|_{ω,α}) ∫_{Q_I} M_α(ωχ_{Q_I}) dV_α`.
///
/// The inner maximal function uses the lattice intervals and the dyadic
/// intervals inside `I`, evaluated on the cells inside `Q_I`; on cells only
/// partly inside `Q_I` it is bounded below by the average over `Q_I`
/// itself. The value is a lower bound for the continuous functional.
pub fn binfty_constant(w: &WeightDescriptor, alpha: f64, lattice_depth: u32) -> Result<ConstantReport> {
    let tess = w.tessellation().clone();
    let l = lattice_depth.min(tess.depth());
    let family = tess.family(IntervalFamily::DyadicAndLattice { depth: l });
    if family.is_empty() {
        return Err(Error::Usage("empty interval family".into()));
    }
    let h = tess.cell_len(l);
    let left = tess.domain().a;
    let n_pts = tess.level_width(l) + 1;
    let max_span = 1usize << l;

    // Averages of ω over lattice boxes (s, e) and over dyadic cells.
    let lattice_avg: Vec<Vec<f64>> = (0..n_pts)
        .into_par_iter()
        .map(|s| {
            ((s + 1)..n_pts.min(s + max_span + 1))
                .map(|e| {
                    let q = Interval {
                        a: left + s as f64 * h,
                        b: left + e as f64 * h,
                    };
                    Ok(w.field.box_mass(alpha, &q)? / carleson_measure(&q, alpha))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let dyadic_avg: Vec<f64> = (0..tess.num_cells())
        .into_par_iter()
        .map(|c| {
            let q = tess.interval(c);
            Ok(w.field.box_mass(alpha, &q)? / carleson_measure(&q, alpha))
        })
        .collect::<Result<_>>()?;
    let cell_measure: Vec<f64> = (0..tess.num_cells())
        .map(|c| tess.cell_alpha_measure(c, alpha))
        .collect::<Result<_>>()?;
    let lat = |s: usize, e: usize| lattice_avg[s][e - s - 1];
    let lattice_index = |x: f64| -> Option<usize> {
        let r = (x - left) / h;
        let k = r.round();
        ((r - k).abs() < 1e-9).then_some(k as usize)
    };

    let values: Vec<f64> = family
        .par_iter()
        .map_init(
            || vec![0.0_f64; tess.num_cells()],
            |chain, q| -> Result<f64> {
                let mass = w.field.box_mass(alpha, q)?;
                if !(mass > 0.0) {
                    return Ok(0.0);
                }
                // Range-max table over lattice sub-intervals of I:
                // best[s][e] = max avg over s' ≤ s, e' ≥ e inside I.
                let table = match (lattice_index(q.a), lattice_index(q.b)) {
                    (Some(a), Some(b)) => {
                        let n = b - a;
                        let mut best = vec![0.0_f64; (n + 1) * (n + 1)];
                        for s in 0..n {
                            for e in (s + 1..=n).rev() {
                                let mut v = lat(a + s, a + e);
                                if s > 0 {
                                    v = v.max(best[(s - 1) * (n + 1) + e]);
                                }
                                if e < n {
                                    v = v.max(best[s * (n + 1) + e + 1]);
                                }
                                best[s * (n + 1) + e] = v;
                            }
                        }
                        Some((a, n, best))
                    }
                    _ => None,
                };
                let mut acc = CompensatedSum::new();
                let mut inside = CompensatedSum::new();
                let mut contained = Vec::new();
                tess.for_each_contained(q, |c| contained.push(c));
                for &c in &contained {
                    let up = tess
                        .parent(c)
                        .filter(|&p| q.contains(&tess.interval(p)))
                        .map_or(0.0, |p| chain[p]);
                    let mut m = dyadic_avg[c].max(up);
                    chain[c] = m;
                    if let Some((a, n, best)) = &table {
                        let iv = tess.interval(c);
                        let s = ((iv.a - left) / h + 1e-9).floor() as usize;
                        let e = ((iv.b - left) / h - 1e-9).ceil() as usize;
                        if s >= *a && e <= a + n && e > s {
                            m = m.max(best[(s - a) * (n + 1) + (e - a)]);
                        }
                    }
                    acc.add(m * cell_measure[c]);
                    inside.add(cell_measure[c]);
                }
                // Parts of cells straddling the boundary of Q_I.
                let own = mass / carleson_measure(q, alpha);
                let rest = carleson_measure(q, alpha) - inside.value();
                if rest > 0.0 {
                    acc.add(own * rest);
                }
                Ok(acc.value() / mass)
            },
        )
        .collect::<Result<_>>()?;
    Ok(sup_over(values, &family))
}

/// Largest ratio `Σ_{I ⊆ J dyadic} |Q_I|_{ω,α} / |Q_J|_{ω,α}` over dyadic
/// `J`, with the maximising `J`.
pub fn dyadic_carleson_sums(w: &GridField, alpha: f64) -> Result<ConstantReport> {
    let tess = w.tessellation();
    let masses: Vec<f64> = (0..tess.num_cells())
        .into_par_iter()
        .map(|c| w.box_mass(alpha, &tess.interval(c)))
        .collect::<Result<_>>()?;
    let mut sums = masses.clone();
    for c in (0..tess.num_cells()).rev() {
        if let Some(p) = tess.parent(c) {
            sums[p] += sums[c];
        }
    }
    let ratios: Vec<f64> = sums.iter().zip(&masses).map(|(s, m)| s / m).collect();
    Ok(sup_over(ratios, &tess.dyadic_intervals()))
}

/// `C_α = 1/(1 − 2^{−(α+1)})`, the ratio `|Q_I|_α / |T_I|_α`.
pub fn top_half_ratio(alpha: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(-(alpha + 1.0)))
}

/// A sub-region `E ⊂ Q_I` given as a union of cells.
#[derive(Debug, Clone)]
pub struct DoublingPair {
    pub outer: Interval,
    pub cells: Vec<CellId>,
}

/// Worst α-doubling ratios over a set of pairs.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    /// `max (|Q|_ω/|E|_ω) / (|Q|_α/|E|_α)`.
    pub worst_ratio: f64,
    /// `max (|Q|_ω/|E|_ω) / (K (|Q|_α/|E|_α)^p)`.
    pub worst_normalized: f64,
    /// Smallest `r` with `|Q|_ω/|E|_ω ≤ (|Q|_α/|E|_α)^r` on all pairs where
    /// the measure ratio exceeds one.
    pub fitted_exponent: f64,
    pub witness: Option<Interval>,
    pub pairs: usize,
    pub skipped: usize,
}

/// Doubling diagnostics with `φ(t) = t^p` and constant `k`.
pub fn doubling_report(w: &WeightDescriptor, alpha: f64, pairs: &[DoublingPair], p: f64, k: f64) -> Result<DoublingReport> {
    let tess = w.tessellation();
    let mut rep = DoublingReport {
        worst_ratio: 0.0,
        worst_normalized: 0.0,
        fitted_exponent: 1.0,
        witness: None,
        pairs: pairs.len(),
        skipped: 0,
    };
    let mut any_strict = false;
    let mut exponent = f64::NEG_INFINITY;
    for pair in pairs {
        let outer_w = w.field.box_mass(alpha, &pair.outer)?;
        let outer_a = alpha_measure(&Region::Carleson(pair.outer), alpha)?;
        let e_w: f64 = pair.cells.iter().map(|&c| w.field.cell_mass(c, alpha)).collect::<CompensatedSum>().value();
        let e_a: f64 = pair
            .cells
            .iter()
            .map(|&c| tess.cell_alpha_measure(c, alpha))
            .collect::<Result<CompensatedSum>>()?
            .value();
        if !(e_w > 0.0 && e_a > 0.0) {
            rep.skipped += 1;
            continue;
        }
        let rw = outer_w / e_w;
        let ra = outer_a / e_a;
        let raw = rw / ra;
        if raw > rep.worst_ratio {
            rep.worst_ratio = raw;
        }
        let norm = rw / (k * ra.powf(p));
        if norm > rep.worst_normalized {
            rep.worst_normalized = norm;
            rep.witness = Some(pair.outer);
        }
        if ra > 1.0 + 1e-12 {
            any_strict = true;
            exponent = exponent.max(rw.ln() / ra.ln());
        }
    }
    if any_strict {
        rep.fitted_exponent = exponent;
    }
    Ok(rep)
}

/// For every dyadic `I` at level `≤ max_level`: `E` = its top half, and
/// `E` = each dyadic sub-square up to `extra` levels below.
pub fn dyadic_doubling_pairs(tess: &Tessellation, max_level: u32, extra: u32) -> Vec<DoublingPair> {
    let mut out = Vec::new();
    for k in 0..=max_level.min(tess.depth()) {
        for i in 0..tess.level_width(k) {
            let outer = tess.interval_at(k, i);
            out.push(DoublingPair {
                outer,
                cells: vec![tess.cell(k, i)],
            });
            for d in 1..=extra {
                let l = k + d;
                if l > tess.depth() {
                    break;
                }
                for j in (i << d)..((i + 1) << d) {
                    let cells = tess
                        .subtree_ranges(l, j)
                        .flat_map(|(lv, r)| r.map(move |x| (lv, x)))
                        .map(|(lv, x)| tess.cell(lv, x))
                        .collect();
                    out.push(DoublingPair { outer, cells });
                }
            }
        }
    }
    out
}
