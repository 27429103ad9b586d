//! Orlicz maximal functions over dyadic, shifted and lattice box families,
//! evaluated at cell granularity, and the box-ratio field `K_μ`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{Interval, IntervalFamily, Shift, Tessellation};
use crate::young::YoungFunction;

/// Which box family produced a maximal field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Dyadic { beta: Shift },
    BruteForce { lattice_depth: u32 },
    TwoGrid,
    Family { family: IntervalFamily },
}

/// A maximal function sampled at cell granularity.
#[derive(Debug, Clone)]
pub struct MaximalField {
    pub field: GridField,
    pub provenance: Provenance,
    /// Number of boxes in the family.
    pub family_size: usize,
    /// Boxes skipped because their weighted mass vanishes.
    pub skipped: usize,
}

impl MaximalField {
    pub fn values(&self) -> &[f64] {
        self.field.values().expect("maximal fields are cell fields")
    }

    pub fn tessellation(&self) -> &Arc<Tessellation> {
        self.field.tessellation()
    }
}

/// Luxembourg norms of `f` over each box, `None` for degenerate boxes.
pub fn box_norms(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    boxes: &[Interval],
) -> Result<Vec<Option<f64>>> {
    boxes
        .par_iter()
        .map(|q| match f.luxembourg_norm(q, phi, weight, alpha) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateBox { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Cell-wise maximum of box values over the boxes containing each cell.
pub fn assign_max(tess: &Tessellation, boxes: &[Interval], values: &[Option<f64>]) -> Vec<f64> {
    let mut out = vec![0.0_f64; tess.num_cells()];
    for (q, v) in boxes.iter().zip(values) {
        if let Some(v) = *v {
            tess.for_each_contained(q, |c| {
                if v > out[c] {
                    out[c] = v;
                }
            });
        }
    }
    out
}

/// Running max down the dyadic tree: each cell takes the largest value of
/// its own box and its ancestors' boxes.
pub fn ancestor_max(tess: &Tessellation, own: &[Option<f64>]) -> Vec<f64> {
    let mut out = vec![0.0_f64; tess.num_cells()];
    for c in 0..tess.num_cells() {
        let up = tess.parent(c).map_or(0.0, |p| out[p]);
        out[c] = own[c].unwrap_or(0.0).max(up);
    }
    out
}

fn finish(tess: &Arc<Tessellation>, values: Vec<f64>, provenance: Provenance, family_size: usize, skipped: usize) -> Result<MaximalField> {
    Ok(MaximalField {
        field: GridField::cells(tess.clone(), values)?,
        provenance,
        family_size,
        skipped,
    })
}

fn count_skipped(v: &[Option<f64>]) -> usize {
    v.iter().filter(|x| x.is_none()).count()
}

/// `M^{d,β}_{Φ,ω,α} f` at cell granularity.
pub fn dyadic_maximal(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    beta: Shift,
) -> Result<MaximalField> {
    let tess = f.tessellation();
    let provenance = Provenance::Dyadic { beta };
    match beta {
        Shift::Zero => {
            let boxes = tess.dyadic_intervals();
            let norms = box_norms(f, phi, weight, alpha, &boxes)?;
            let values = ancestor_max(tess, &norms);
            finish(tess, values, provenance, boxes.len(), count_skipped(&norms))
        }
        Shift::Third => {
            let boxes = tess.family(IntervalFamily::Shifted { shift: Shift::Third });
            let norms = box_norms(f, phi, weight, alpha, &boxes)?;
            let values = assign_max(tess, &boxes, &norms);
            finish(tess, values, provenance, boxes.len(), count_skipped(&norms))
        }
    }
}

/// Maximal function over an arbitrary interval family.
pub fn family_maximal(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    family: IntervalFamily,
) -> Result<MaximalField> {
    if family == IntervalFamily::Dyadic {
        return dyadic_maximal(f, phi, weight, alpha, Shift::Zero);
    }
    let tess = f.tessellation();
    let boxes = tess.family(family);
    let norms = box_norms(f, phi, weight, alpha, &boxes)?;
    let values = assign_max(tess, &boxes, &norms);
    finish(tess, values, Provenance::Family { family }, boxes.len(), count_skipped(&norms))
}

/// Oracle maximal function over every lattice interval at `lattice_depth`
/// together with the dyadic intervals finer than the lattice.
pub fn brute_force_maximal(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    lattice_depth: u32,
) -> Result<MaximalField> {
    let tess = f.tessellation();
    if lattice_depth > tess.depth() {
        return Err(Error::Domain(format!(
            "lattice depth {lattice_depth} exceeds tessellation depth {}",
            tess.depth()
        )));
    }
    let boxes = tess.family(IntervalFamily::DyadicAndLattice { depth: lattice_depth });
    let norms = box_norms(f, phi, weight, alpha, &boxes)?;
    let values = assign_max(tess, &boxes, &norms);
    finish(tess, values, Provenance::BruteForce { lattice_depth }, boxes.len(), count_skipped(&norms))
}

/// Cell-wise maximum of the `β = 0` and `β = 1/3` dyadic maximal functions.
pub fn two_grid_maximal(f: &GridField, phi: &YoungFunction, weight: &GridField, alpha: f64) -> Result<MaximalField> {
    let a = dyadic_maximal(f, phi, weight, alpha, Shift::Zero)?;
    let b = dyadic_maximal(f, phi, weight, alpha, Shift::Third)?;
    Ok(MaximalField {
        field: a.field.max(&b.field)?,
        provenance: Provenance::TwoGrid,
        family_size: a.family_size + b.family_size,
        skipped: a.skipped + b.skipped,
    })
}

/// Unweighted Hardy–Littlewood maximal function `M_α g`: averages of `g`
/// against `dV_α` over the family.
pub fn hardy_littlewood(g: &GridField, alpha: f64, family: IntervalFamily) -> Result<MaximalField> {
    let one = GridField::constant(g.tessellation().clone(), 1.0)?;
    let g = if g.is_analytic() { g.to_cells(alpha)? } else { g.clone() };
    family_maximal(&g, &YoungFunction::power(1.0)?, &one, alpha, family)
}

/// `K_μ`: per-cell supremum of `μ(Q_I)/|Q_I|_{ω,α}` over the family boxes
/// containing the cell. `mu` is a density against `dV_α`.
pub fn kmu_field(mu: &GridField, weight: &GridField, alpha: f64, family: IntervalFamily) -> Result<MaximalField> {
    if !mu.same_grid(weight) {
        return Err(Error::Usage("mu and weight live on different tessellations".into()));
    }
    let tess = mu.tessellation();
    let boxes = tess.family(family);
    let ratios: Vec<Option<f64>> = boxes
        .par_iter()
        .map(|q| {
            let w = weight.box_mass(alpha, q)?;
            (w > 0.0).then(|| mu.box_mass(alpha, q).map(|m| m / w)).transpose()
        })
        .collect::<Result<_>>()?;
    let values = if family == IntervalFamily::Dyadic {
        ancestor_max(tess, &ratios)
    } else {
        assign_max(tess, &boxes, &ratios)
    };
    finish(tess, values, Provenance::Family { family }, boxes.len(), count_skipped(&ratios))
}

/// Smallest `C` with `brute ≤ C·(d0 + d13)` cell-wise; cells where both
/// sides vanish are ignored.
pub fn two_grid_domination_constant(brute: &MaximalField, d0: &MaximalField, d13: &MaximalField) -> f64 {
    let mut c = 0.0_f64;
    for ((b, x), y) in brute.values().iter().zip(d0.values()).zip(d13.values()) {
        let s = x + y;
        if *b > 0.0 {
            c = c.max(if s > 0.0 { b / s } else { f64::INFINITY });
        }
    }
    c
}
