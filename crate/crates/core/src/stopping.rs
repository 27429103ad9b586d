//! Stopping families of maximal dyadic boxes, weak-type level-set bounds,
//! Carleson sequences and the Carleson embedding check.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{CellId, Interval, Tessellation};
use crate::maximal::{ancestor_max, box_norms};
use crate::numeric::CompensatedSum;
use crate::young::YoungFunction;

/// Luxembourg norms of one field over every dyadic box of its tessellation.
#[derive(Debug, Clone)]
pub struct DyadicNorms {
    pub tess: Arc<Tessellation>,
    pub norms: Vec<Option<f64>>,
}

impl DyadicNorms {
    pub fn compute(f: &GridField, phi: &YoungFunction, weight: &GridField, alpha: f64) -> Result<Self> {
        let tess = f.tessellation().clone();
        let norms = box_norms(f, phi, weight, alpha, &tess.dyadic_intervals())?;
        Ok(Self { tess, norms })
    }

    pub fn norm(&self, c: CellId) -> f64 {
        self.norms[c].unwrap_or(0.0)
    }

    /// The dyadic maximal function at cell granularity.
    pub fn maximal(&self) -> Vec<f64> {
        ancestor_max(&self.tess, &self.norms)
    }
}

/// Maximal dyadic boxes whose norm exceeds `lambda`.
#[derive(Debug, Clone, Serialize)]
pub struct StoppingFamily {
    pub lambda: f64,
    pub cells: Vec<CellId>,
    pub norms: Vec<f64>,
}

/// Outcome of the structural checks on a stopping family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StoppingChecks {
    pub disjoint: bool,
    pub threshold: bool,
    pub maximal: bool,
    pub union: bool,
}

impl StoppingChecks {
    pub fn all(&self) -> bool {
        self.disjoint && self.threshold && self.maximal && self.union
    }
}

impl StoppingFamily {
    /// Top-down selection from each root.
    pub fn from_norms(norms: &DyadicNorms, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("threshold must be > 0, got {lambda}")));
        }
        let tess = &norms.tess;
        let mut cells = Vec::new();
        let mut stack: Vec<(u32, usize)> = (0..tess.roots()).rev().map(|i| (0, i)).collect();
        while let Some((k, i)) = stack.pop() {
            let c = tess.cell(k, i);
            if norms.norm(c) > lambda {
                cells.push(c);
            } else if k < tess.depth() {
                stack.push((k + 1, 2 * i + 1));
                stack.push((k + 1, 2 * i));
            }
        }
        cells.sort_unstable();
        let selected = cells.iter().map(|&c| norms.norm(c)).collect();
        Ok(Self {
            lambda,
            cells,
            norms: selected,
        })
    }

    pub fn intervals(&self, tess: &Tessellation) -> Vec<Interval> {
        self.cells.iter().map(|&c| tess.interval(c)).collect()
    }

    /// Cells lying in the union of the selected Carleson squares.
    pub fn covered(&self, tess: &Tessellation) -> Vec<bool> {
        let mut out = vec![false; tess.num_cells()];
        for &c in &self.cells {
            tess.for_each_contained(&tess.interval(c), |x| out[x] = true);
        }
        out
    }

    /// `Σ_j |Q_{I_j}|_{ω,α}`.
    pub fn mass(&self, weight: &GridField, alpha: f64) -> Result<f64> {
        let tess = weight.tessellation();
        let mut acc = CompensatedSum::new();
        for &c in &self.cells {
            acc.add(weight.box_mass(alpha, &tess.interval(c))?);
        }
        Ok(acc.value())
    }

    /// Checks disjointness, the threshold, maximality against the stated
    /// norms, and that the union is `{maximal > λ}` cell by cell.
    pub fn check(&self, norms: &DyadicNorms, maximal: &[f64]) -> StoppingChecks {
        let tess = &norms.tess;
        let ivs = self.intervals(tess);
        let mut disjoint = true;
        for (x, a) in ivs.iter().enumerate() {
            for b in &ivs[x + 1..] {
                if a.overlaps(b) {
                    disjoint = false;
                }
            }
        }
        let threshold = self.norms.iter().all(|&n| n > self.lambda);
        let maximal_ok = self.cells.iter().all(|&c| {
            let mut p = tess.parent(c);
            while let Some(a) = p {
                if norms.norm(a) > self.lambda {
                    return false;
                }
                p = tess.parent(a);
            }
            true
        });
        let covered = self.covered(tess);
        let union = covered.iter().zip(maximal).all(|(&cov, &m)| cov == (m > self.lambda));
        StoppingChecks {
            disjoint,
            threshold,
            maximal: maximal_ok,
            union,
        }
    }

    /// Selected non-root boxes whose norm exceeds `K φ(2^{2+α}) λ` with
    /// `φ(t) = t^p`.
    pub fn doubling_violations(&self, tess: &Tessellation, alpha: f64, p: f64, k: f64) -> usize {
        let cap = k * 2f64.powf(p * (2.0 + alpha)) * self.lambda * (1.0 + 1e-9);
        self.cells
            .iter()
            .zip(&self.norms)
            .filter(|(&c, &n)| tess.parent(c).is_some() && n > cap)
            .count()
    }

    /// Every box of `self` lies inside some box of `coarser`.
    pub fn refines(&self, coarser: &StoppingFamily, tess: &Tessellation) -> bool {
        let outer = coarser.intervals(tess);
        self.intervals(tess).iter().all(|i| outer.iter().any(|o| o.contains(i)))
    }
}

pub fn stopping_family(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    lambda: f64,
) -> Result<StoppingFamily> {
    StoppingFamily::from_norms(&DyadicNorms::compute(f, phi, weight, alpha)?, lambda)
}

/// Both sides of the weak-type level-set bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelSetBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `|{M^d f > λ}|_{ω,α}` against `K_Φ ∫_{f > λ/2} Φ(f/λ) ω dV_α` with
/// `K_Φ` the Δ₂ constant of `Φ`.
pub fn levelset_mass_bound(
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    lambda: f64,
) -> Result<LevelSetBound> {
    let norms = DyadicNorms::compute(f, phi, weight, alpha)?;
    levelset_mass_bound_with(&norms, f, phi, weight, alpha, lambda, phi.delta2_default(1e6))
}

/// As [`levelset_mass_bound`] with precomputed norms and Δ₂ constant.
pub fn levelset_mass_bound_with(
    norms: &DyadicNorms,
    f: &GridField,
    phi: &YoungFunction,
    weight: &GridField,
    alpha: f64,
    lambda: f64,
    k_phi: f64,
) -> Result<LevelSetBound> {
    let fam = StoppingFamily::from_norms(norms, lambda)?;
    let lhs = fam.mass(weight, alpha)?;
    let vals = f
        .values()
        .ok_or_else(|| Error::Usage("levelset_mass_bound needs a cell field".into()))?;
    let mut acc = CompensatedSum::new();
    for (c, &v) in vals.iter().enumerate() {
        if v > 0.5 * lambda {
            acc.add(phi.value(v / lambda) * weight.cell_mass(c, alpha));
        }
    }
    let rhs = k_phi * acc.value();
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(LevelSetBound { lhs, rhs, ratio })
}

/// Nonnegative values on dyadic boxes with a certified Carleson constant.
#[derive(Debug, Clone)]
pub struct CarlesonSequence {
    pub values: Vec<f64>,
    pub gamma: f64,
    /// `A = max_R Σ_{Q ⊆ R} λ_Q / |R|_{ω,α}^γ` over all dyadic `R`.
    pub constant: f64,
    pub weight: GridField,
    pub alpha: f64,
}

impl CarlesonSequence {
    pub fn certify(values: Vec<f64>, weight: &GridField, alpha: f64, gamma: f64) -> Result<Self> {
        let tess = weight.tessellation();
        if values.len() != tess.num_cells() {
            return Err(Error::Usage("one value per dyadic box is required".into()));
        }
        if !(gamma >= 1.0) {
            return Err(Error::Domain(format!("gamma must be >= 1, got {gamma}")));
        }
        let mut sums = values.clone();
        for c in (0..tess.num_cells()).rev() {
            if let Some(p) = tess.parent(c) {
                sums[p] += sums[c];
            }
        }
        let mut constant = 0.0_f64;
        for (c, s) in sums.iter().enumerate() {
            if *s > 0.0 {
                let m = weight.box_mass(alpha, &tess.interval(c))?;
                constant = constant.max(s / m.powf(gamma));
            }
        }
        Ok(Self {
            values,
            gamma,
            constant,
            weight: weight.clone(),
            alpha,
        })
    }

    /// `λ_Q = |Q|_{ω,α}^γ` on every dyadic box.
    pub fn box_masses(weight: &GridField, alpha: f64, gamma: f64) -> Result<Self> {
        let tess = weight.tessellation();
        let values = (0..tess.num_cells())
            .map(|c| Ok(weight.box_mass(alpha, &tess.interval(c))?.powf(gamma)))
            .collect::<Result<Vec<_>>>()?;
        Self::certify(values, weight, alpha, gamma)
    }
}

/// Outcome of the Carleson embedding check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub bound: f64,
    pub observed: f64,
    pub pass: bool,
}

/// `Σ_Q λ_Q ‖f‖_Q^{pγ} ≤ A γ ‖M^d f‖_{p,ω,α}^{pγ}`.
pub fn carleson_embedding_check(
    seq: &CarlesonSequence,
    f: &GridField,
    phi: &YoungFunction,
    p: f64,
) -> Result<EmbeddingCheck> {
    if !phi.bp_check(p, 1.0)?.member {
        return Err(Error::Usage(format!("{} is not in B_{p}", phi.label())));
    }
    let norms = DyadicNorms::compute(f, phi, &seq.weight, seq.alpha)?;
    let pg = p * seq.gamma;
    let lhs = seq
        .values
        .iter()
        .zip(&norms.norms)
        .map(|(l, n)| l * n.unwrap_or(0.0).powf(pg))
        .collect::<CompensatedSum>()
        .value();
    let maximal = GridField::cells(f.tessellation().clone(), norms.maximal())?;
    let rhs = maximal.lp_norm_pow(&seq.weight, seq.alpha, p)?.powf(seq.gamma);
    let bound = seq.constant * seq.gamma * rhs;
    Ok(EmbeddingCheck {
        lhs,
        rhs,
        bound,
        observed: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        pass: lhs <= bound * (1.0 + 1e-8),
    })
}

/// Outcome of the Carleson-measure level-set check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasureLevelSet {
    pub constant: f64,
    pub mu_mass: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `μ({M^d f > t}) ≤ C |{M^d f > t}|_{ω,α}^γ` with `C` the dyadic Carleson
/// constant of `μ`.
pub fn carleson_measure_levelset_check(
    mu: &GridField,
    weight: &GridField,
    alpha: f64,
    gamma: f64,
    norms: &DyadicNorms,
    t: f64,
) -> Result<MeasureLevelSet> {
    let tess = weight.tessellation();
    let mut constant = 0.0_f64;
    for c in 0..tess.num_cells() {
        let q = tess.interval(c);
        let m = weight.box_mass(alpha, &q)?;
        if m > 0.0 {
            constant = constant.max(mu.box_mass(alpha, &q)? / m.powf(gamma));
        }
    }
    let fam = StoppingFamily::from_norms(norms, t)?;
    let mu_mass = fam.mass(mu, alpha)?;
    let bound = constant * fam.mass(weight, alpha)?.powf(gamma);
    Ok(MeasureLevelSet {
        constant,
        mu_mass,
        bound,
        pass: mu_mass <= bound * (1.0 + 1e-9),
    })
}

/// Cells with `a^k < M ≤ a^{k+1}` not covered by the `λ = a^k` stopping
/// boxes, summed over `k` in `range`.
pub fn omega_cover_violations(norms: &DyadicNorms, a: f64, range: std::ops::RangeInclusive<i32>) -> Result<usize> {
    let maximal = norms.maximal();
    let mut bad = 0;
    for k in range {
        let lo = a.powi(k);
        let hi = a.powi(k + 1);
        let covered = StoppingFamily::from_norms(norms, lo)?.covered(&norms.tess);
        bad += maximal
            .iter()
            .zip(&covered)
            .filter(|(&m, &cov)| m > lo && m <= hi && !cov)
            .count();
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(depth: u32) -> Arc<Tessellation> {
        Arc::new(Tessellation::single(Interval::new(0.0, 1.0).unwrap(), depth).unwrap())
    }

    #[test]
    fn quarter_indicator_selects_left_half() {
        let t = unit(4);
        let f = GridField::indicator(t.clone(), &Interval::new(0.0, 0.25).unwrap());
        let one = GridField::constant(t.clone(), 1.0).unwrap();
        let id = YoungFunction::power(1.0).unwrap();
        let fam = stopping_family(&f, &id, &one, 0.0, 0.2).unwrap();
        assert_eq!(fam.intervals(&t), vec![Interval::new(0.0, 0.5).unwrap()]);
        assert!((fam.norms[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_field_families() {
        let t = unit(4);
        let f = GridField::constant(t.clone(), 3.0).unwrap();
        let one = GridField::constant(t.clone(), 1.0).unwrap();
        let phi = YoungFunction::power(2.0).unwrap();
        assert!(stopping_family(&f, &phi, &one, 0.0, 3.0).unwrap().cells.is_empty());
        assert_eq!(stopping_family(&f, &phi, &one, 0.0, 2.9).unwrap().cells, vec![0]);
    }

    #[test]
    fn levelset_bound_examples() {
        let t = unit(5);
        let one = GridField::constant(t.clone(), 1.0).unwrap();
        let id = YoungFunction::power(1.0).unwrap();
        let c = GridField::constant(t.clone(), 1.5).unwrap();
        let b = levelset_mass_bound(&c, &id, &one, 0.0, 3.0).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
        let j = Interval::new(0.25, 0.5).unwrap();
        let chi = GridField::indicator(t.clone(), &j);
        let b = levelset_mass_bound(&chi, &id, &one, 0.0, 0.5).unwrap();
        assert!(b.lhs <= 2.0 * one.box_mass(0.0, &j).unwrap() + 1e-15);
        assert!(b.ratio <= 1.0);
    }

    #[test]
    fn carleson_measure_of_the_weight_itself() {
        let t = unit(5);
        let w = GridField::power_y(t.clone(), 0.3, 1.0).unwrap();
        let f = GridField::seeded(t.clone(), 4, 0.1, 10.0, None).unwrap();
        let norms = DyadicNorms::compute(&f, &YoungFunction::power(1.5).unwrap(), &w, 0.0).unwrap();
        let r = carleson_measure_levelset_check(&w, &w, 0.0, 1.0, &norms, 1.0).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12);
        assert!((r.mu_mass - r.bound).abs() <= 1e-12 * r.bound.max(1.0));
        let half = carleson_measure_levelset_check(&w.scale(0.5), &w, 0.0, 1.0, &norms, 1.0).unwrap();
        assert!((half.constant - 0.5).abs() < 1e-12);
        assert!((half.mu_mass - 0.5 * r.mu_mass).abs() < 1e-12);
    }

    #[test]
    fn single_box_sequence() {
        let t = unit(4);
        let one = GridField::constant(t.clone(), 1.0).unwrap();
        let f = GridField::seeded(t.clone(), 1, 0.5, 2.0, None).unwrap();
        let q0 = t.cell(2, 1);
        let mut values = vec![0.0; t.num_cells()];
        values[q0] = one.box_mass(0.0, &t.interval(q0)).unwrap();
        let seq = CarlesonSequence::certify(values, &one, 0.0, 1.0).unwrap();
        assert!((seq.constant - 1.0).abs() < 1e-12);
        let phi = YoungFunction::power(1.5).unwrap();
        let r = carleson_embedding_check(&seq, &f, &phi, 2.0).unwrap();
        assert!(r.pass && r.lhs <= r.rhs);
        let zero = GridField::constant(t, 0.0).unwrap();
        let r0 = carleson_embedding_check(&seq, &zero, &phi, 2.0).unwrap();
        assert_eq!((r0.lhs, r0.rhs), (0.0, 0.0));
        assert!(r0.pass);
        assert!(carleson_embedding_check(&seq, &f, &YoungFunction::power(2.0).unwrap(), 2.0).is_err());
    }

    #[test]
    fn omega_covers() {
        let t = unit(6);
        let one = GridField::constant(t.clone(), 1.0).unwrap();
        let f = GridField::seeded(t.clone(), 17, 0.01, 100.0, None).unwrap();
        let norms = DyadicNorms::compute(&f, &YoungFunction::power(1.0).unwrap(), &one, 0.0).unwrap();
        assert_eq!(omega_cover_violations(&norms, 2.0, -8..=8).unwrap(), 0);
    }
}
