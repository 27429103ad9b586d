//! Theorem experiments: condition constants, empirical embedding ratios and
//! pass/fail reports across depths.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, TheoremId};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{Interval, IntervalFamily, Shift, Tessellation};
use crate::maximal::{assign_max, box_norms, dyadic_maximal, hardy_littlewood, kmu_field, two_grid_maximal, MaximalField};
use crate::weights::{bekolle_constant, doubling_report, dyadic_doubling_pairs, WeightDescriptor};
use crate::young::YoungFunction;

/// Growth factor allowed between consecutive depths.
pub const STABILITY_FACTOR: f64 = 1.5;

/// Slack on the exact necessity chain.
pub const NECESSITY_RTOL: f64 = 1e-8;

/// A named test function.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub label: String,
    pub field: GridField,
    /// The box whose indicator this is.
    pub indicator_of: Option<Interval>,
}

/// The unit root in the middle of the domain, where test functions live.
pub fn support_root(tess: &Tessellation) -> Interval {
    tess.root_interval(tess.roots() / 2)
}

/// Indicators of dyadic boxes in the support root, seeded log-uniform
/// fields on it, and the constant field.
pub fn test_family(cfg: &ExperimentConfig, tess: &Arc<Tessellation>) -> Result<Vec<TestFunction>> {
    let spec = &cfg.family;
    let support = support_root(tess);
    let mut out = Vec::new();
    if spec.indicators {
        let top = spec.max_indicator_level.unwrap_or(tess.depth()).min(tess.depth());
        for k in 0..=top {
            for i in 0..tess.level_width(k) {
                let iv = tess.interval_at(k, i);
                if support.contains(&iv) {
                    out.push(TestFunction {
                        label: format!("indicator[level={k},index={i}]"),
                        field: GridField::indicator(tess.clone(), &iv),
                        indicator_of: Some(iv),
                    });
                }
            }
        }
    }
    for j in 0..spec.seeded {
        let seed = spec.seed.wrapping_add(j as u64);
        out.push(TestFunction {
            label: format!("seeded[seed={seed:#x}]"),
            field: GridField::seeded(tess.clone(), seed, spec.range[0], spec.range[1], Some(&support))?,
            indicator_of: None,
        });
    }
    if spec.constant {
        out.push(TestFunction {
            label: "constant".into(),
            field: GridField::constant(tess.clone(), 1.0)?,
            indicator_of: None,
        });
    }
    Ok(out)
}

/// Everything an instance needs at one depth.
#[derive(Debug, Clone)]
pub struct Setting {
    pub theorem: TheoremId,
    pub depth: u32,
    pub tess: Arc<Tessellation>,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: Option<f64>,
    pub phi: YoungFunction,
    pub omega: WeightDescriptor,
    pub mu: GridField,
    pub one: GridField,
    /// `M_α ω`, for the theorems whose right-hand side uses it.
    pub m_omega: Option<GridField>,
}

impl Setting {
    pub fn new(cfg: &ExperimentConfig, depth: u32) -> Result<Self> {
        cfg.validate()?;
        let theorem = cfg.theorem.ok_or_else(|| Error::config("theorem", "a theorem id is required"))?;
        let tess = cfg.tessellation(depth)?;
        let alpha = cfg.alpha;
        let omega = GridField::from_spec(&cfg.omega, tess.clone(), "omega")?;
        let omega = WeightDescriptor::new(omega).map_err(|e| Error::config("omega", e.to_string()))?;
        let mu = GridField::from_spec(&cfg.mu, tess.clone(), "mu")?;
        let one = GridField::constant(tess.clone(), 1.0)?;
        let m_omega = match theorem {
            TheoremId::T4 | TheoremId::T5 => Some(two_grid_hl(&omega.field, alpha)?.field),
            _ => None,
        };
        Ok(Self {
            theorem,
            depth,
            tess,
            alpha,
            p: cfg.p,
            q: cfg.q(),
            r: cfg.r,
            phi: YoungFunction::from_spec(&cfg.phi).map_err(|e| Error::config("phi", e.to_string()))?,
            omega,
            mu,
            one,
            m_omega,
        })
    }

    /// The maximal operator of the theorem applied to `f`.
    pub fn operator(&self, f: &GridField) -> Result<MaximalField> {
        match self.theorem {
            TheoremId::T1 | TheoremId::T2 => two_grid_maximal(f, &self.phi, &self.omega.field, self.alpha),
            TheoremId::T3 | TheoremId::C1 => two_grid_maximal(f, &YoungFunction::power(1.0)?, &self.one, self.alpha),
            TheoremId::T4 | TheoremId::T5 => two_grid_maximal(f, &self.phi, &self.one, self.alpha),
        }
    }

    /// Weight `v` of the right-hand side `(∫ |f|^p v dV_α)^{1/p}`.
    pub fn rhs_weight(&self) -> Result<GridField> {
        match self.theorem {
            TheoremId::T1 | TheoremId::T2 => Ok(self.omega.field.clone()),
            TheoremId::T3 | TheoremId::C1 => self.omega.field.powf(self.p),
            TheoremId::T4 | TheoremId::T5 => Ok(self.m_omega.clone().expect("set for T4/T5")),
        }
    }

    /// `(LHS, RHS)` of the embedding inequality for `f`.
    pub fn sides(&self, f: &GridField, rhs_weight: &GridField) -> Result<(f64, f64)> {
        let m = self.operator(f)?;
        let lhs = m.field.lp_norm(&self.mu, self.alpha, self.q)?;
        let rhs = f.lp_norm(rhs_weight, self.alpha, self.p)?;
        if rhs == 0.0 && lhs > 0.0 {
            return Err(Error::ContractViolation(format!(
                "right-hand side vanishes with left-hand side {lhs}"
            )));
        }
        Ok((lhs, rhs))
    }

    /// The box functional of the theorem's condition on `Q_I`, for the
    /// theorems whose condition is a supremum over boxes.
    fn box_condition(&self, i: &Interval, psi: &YoungFunction, winv: Option<&GridField>) -> Result<Option<f64>> {
        let (a, q, p) = (self.alpha, self.q, self.p);
        let mu = self.mu.box_mass(a, i)?;
        let v = match self.theorem {
            TheoremId::T1 | TheoremId::T4 | TheoremId::T2 | TheoremId::T5 => {
                let w = self.omega.field.box_mass(a, i)?;
                if !(w > 0.0) {
                    return Ok(None);
                }
                mu / w.powf(q / p)
            }
            TheoremId::T3 => {
                let vol = self.one.box_mass(a, i)?;
                let winv = winv.expect("set for T3");
                let n = match winv.luxembourg_norm(i, psi, &self.one, a) {
                    Ok(n) => n,
                    Err(Error::DegenerateBox { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                n.powf(q) * mu / vol.powf(q / p)
            }
            TheoremId::C1 => {
                let e = c1_exponent(p, self.r.expect("validated"));
                let vol = self.one.box_mass(a, i)?;
                let avg = winv.expect("set for C1").box_mass(a, i)? / vol;
                avg.powf(q / e) * mu / vol.powf(q / p)
            }
        };
        Ok(Some(v))
    }
}

/// `p'r`, the integrability exponent of `ω^{-1}` in the corollary.
pub fn c1_exponent(p: f64, r: f64) -> f64 {
    p / (p - 1.0) * r
}

/// Cell-wise max of the `β = 0` and `β = 1/3` Hardy–Littlewood fields.
pub fn two_grid_hl(g: &GridField, alpha: f64) -> Result<MaximalField> {
    let a = hardy_littlewood(g, alpha, IntervalFamily::Dyadic)?;
    let b = hardy_littlewood(g, alpha, IntervalFamily::Shifted { shift: Shift::Third })?;
    Ok(MaximalField {
        field: a.field.max(&b.field)?,
        provenance: crate::maximal::Provenance::TwoGrid,
        family_size: a.family_size + b.family_size,
        skipped: a.skipped + b.skipped,
    })
}

/// `K_μ` over both grids.
pub fn two_grid_kmu(mu: &GridField, weight: &GridField, alpha: f64) -> Result<GridField> {
    let a = kmu_field(mu, weight, alpha, IntervalFamily::Dyadic)?;
    let b = kmu_field(mu, weight, alpha, IntervalFamily::Shifted { shift: Shift::Third })?;
    a.field.max(&b.field)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRecord {
    pub depth: u32,
    pub constant: f64,
    pub witness: Option<Interval>,
    /// False when the constant diverged.
    pub member: bool,
    pub family_size: usize,
}

impl ConditionRecord {
    /// Scale on which depth stability is judged: `C^{1/q}` for box
    /// suprema, the norm itself for `K_μ` conditions.
    pub fn normalized(&self, theorem: TheoremId, q: f64) -> f64 {
        if theorem.lower_triangle() {
            self.constant
        } else {
            self.constant.powf(1.0 / q)
        }
    }
}

fn sup_with_witness(values: &[Option<f64>], boxes: &[Interval]) -> (f64, Option<Interval>) {
    let mut best = (0.0_f64, None);
    for (v, b) in values.iter().zip(boxes) {
        if let Some(v) = *v {
            if v > best.0 || (!v.is_finite() && best.1.is_none()) {
                best = (v, Some(*b));
            }
        }
    }
    best
}

/// The theorem's condition constant over `boxes` (dyadic boxes of the
/// whole domain when `None`).
pub fn condition_in(s: &Setting, boxes: Option<&[Interval]>) -> Result<ConditionRecord> {
    let all;
    let boxes = match boxes {
        Some(b) => b,
        None => {
            all = s.tess.dyadic_intervals();
            &all
        }
    };
    let psi = s.phi.conjugate();
    let winv = match s.theorem {
        TheoremId::T3 => Some(s.omega.field.powf(-1.0)?.to_cells(s.alpha)?),
        TheoremId::C1 => Some(s.omega.field.powf(-c1_exponent(s.p, s.r.expect("validated")))?),
        _ => None,
    };
    let values: Vec<Option<f64>> = boxes
        .par_iter()
        .map(|b| s.box_condition(b, &psi, winv.as_ref()))
        .collect::<Result<_>>()?;
    let (sup, witness) = sup_with_witness(&values, boxes);
    let constant = if s.theorem.lower_triangle() {
        let kmu = two_grid_kmu(&s.mu, &s.omega.field, s.alpha)?;
        let outer = match s.theorem {
            TheoremId::T2 => s.omega.field.clone(),
            _ => s.m_omega.clone().expect("set for T5"),
        };
        let exponent = s.p / (s.p - s.q);
        kmu.lp_norm(&outer, s.alpha, exponent)?
    } else {
        sup
    };
    Ok(ConditionRecord {
        depth: s.depth,
        constant,
        witness,
        member: constant.is_finite(),
        family_size: boxes.len(),
    })
}

/// Condition constant of the instance at `depth`.
pub fn condition_constant(cfg: &ExperimentConfig, depth: u32) -> Result<ConditionRecord> {
    condition_in(&Setting::new(cfg, depth)?, None)
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRecord {
    pub depth: u32,
    pub value: f64,
    pub witness_f: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Smallest ratio over the family (positive for a family of nonzero
    /// functions).
    pub min_ratio: f64,
    pub family_size: usize,
}

/// Per-function ratios, in family order.
pub fn ratios_in(s: &Setting, family: &[TestFunction]) -> Result<Vec<(f64, f64)>> {
    let w = s.rhs_weight()?;
    family.par_iter().map(|t| s.sides(&t.field, &w)).collect()
}

fn ratio_record(s: &Setting, family: &[TestFunction], sides: &[(f64, f64)]) -> RatioRecord {
    let mut best = RatioRecord {
        depth: s.depth,
        value: 0.0,
        witness_f: String::new(),
        lhs: 0.0,
        rhs: 0.0,
        min_ratio: f64::INFINITY,
        family_size: family.len(),
    };
    for (t, &(lhs, rhs)) in family.iter().zip(sides) {
        let r = lhs / rhs;
        if r > best.value || best.witness_f.is_empty() {
            best.value = r;
            best.witness_f = t.label.clone();
            best.lhs = lhs;
            best.rhs = rhs;
        }
        best.min_ratio = best.min_ratio.min(r);
    }
    best
}

/// Empirical operator ratio of the instance at `depth`.
pub fn embedding_ratio(cfg: &ExperimentConfig, depth: u32) -> Result<RatioRecord> {
    let s = Setting::new(cfg, depth)?;
    let family = test_family(cfg, &s.tess)?;
    let sides = ratios_in(&s, &family)?;
    Ok(ratio_record(&s, &family, &sides))
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl Assertion {
    /// `lhs ≤ rhs`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            pass: lhs <= rhs,
            lhs,
            rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub instance: ExperimentConfig,
    /// At the deepest depth.
    pub condition: ConditionRecord,
    pub conditions: Vec<ConditionRecord>,
    pub ratios: Vec<RatioRecord>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
    pub runtime_ms: u64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    /// JSON with the runtime zeroed, for byte comparisons.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.runtime_ms = 0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

/// Exponents tried, in order, when certifying `ω ∈ B_{p,α}` for some `p`.
fn certification_exponents(p: f64) -> [f64; 4] {
    [p, 2.0 * p, 4.0 * p, 8.0 * p]
}

/// Runs the instance at each configured depth and asserts hypotheses,
/// the exact necessity chain where one exists, finiteness and depth
/// stability.
pub fn theorem_report(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    cfg.validate()?;
    let theorem = cfg.theorem.ok_or_else(|| Error::config("theorem", "a theorem id is required"))?;
    let (p, q) = (cfg.p, cfg.q());
    let mut assertions = Vec::new();
    let mut notes = Vec::new();

    let phi = YoungFunction::from_spec(&cfg.phi).map_err(|e| Error::config("phi", e.to_string()))?;
    let bp = phi.bp_check(p, 1.0)?;
    assertions.push(Assertion {
        name: format!("hypothesis: {} in B_{p}", phi.label()),
        pass: bp.member,
        lhs: bp.integral,
        rhs: f64::INFINITY,
    });
    if theorem == TheoremId::T4 {
        notes.push(
            "right-hand side integrates |f|^p M_alpha(omega) against dV_alpha; the statement's d(mu) is read as a typo"
                .into(),
        );
    }

    let mut conditions = Vec::new();
    let mut ratios = Vec::new();
    for (n, &depth) in cfg.depths.iter().enumerate() {
        let s = Setting::new(cfg, depth)?;
        if n == 0 && matches!(theorem, TheoremId::T1 | TheoremId::T2) {
            let mut certified = None;
            for pc in certification_exponents(p) {
                let c = bekolle_constant(&s.omega, pc, s.alpha, IntervalFamily::Dyadic)?;
                if c.constant.is_finite() {
                    certified = Some((pc, c.constant));
                    break;
                }
            }
            let (pc, c) = certified.unwrap_or((p, f64::INFINITY));
            notes.push(format!("omega certified through B_{{{pc},alpha}} at depth {depth}"));
            assertions.push(Assertion {
                name: format!("hypothesis: omega in B_{pc}"),
                pass: c.is_finite(),
                lhs: c,
                rhs: f64::INFINITY,
            });
        }

        let family = test_family(cfg, &s.tess)?;
        let cond = condition_in(&s, None)?;
        let sides = ratios_in(&s, &family)?;
        let rec = ratio_record(&s, &family, &sides);

        assertions.push(Assertion {
            name: format!("condition finite [depth {depth}]"),
            pass: cond.member,
            lhs: cond.constant,
            rhs: f64::INFINITY,
        });
        assertions.push(Assertion {
            name: format!("ratio finite and positive [depth {depth}]"),
            pass: rec.value.is_finite() && rec.min_ratio > 0.0,
            lhs: rec.min_ratio,
            rhs: rec.value,
        });

        if theorem == TheoremId::T1 {
            // Testing against χ_{Q_I} gives μ(Q_I)^{1/q} ≤ ratio·|Q_I|^{1/p}
            // on exactly the indicator boxes.
            let boxes: Vec<Interval> = family.iter().filter_map(|t| t.indicator_of).collect();
            if !boxes.is_empty() {
                let box_const = condition_in(&s, Some(&boxes))?;
                assertions.push(Assertion::le(
                    format!("necessity: box constant <= ratio^q [depth {depth}]"),
                    box_const.constant,
                    rec.value.powf(q) * (1.0 + NECESSITY_RTOL),
                ));
            }
        }
        if theorem == TheoremId::T2 {
            let worst = family
                .par_iter()
                .filter(|t| t.indicator_of.is_none())
                .map(|t| -> Result<f64> {
                    let hl = two_grid_maximal(&t.field, &YoungFunction::power(1.0)?, &s.omega.field, s.alpha)?;
                    let orl = s.operator(&t.field)?;
                    Ok(hl
                        .values()
                        .iter()
                        .zip(orl.values())
                        .map(|(h, o)| if *o > 0.0 { h / o } else if *h > 0.0 { f64::INFINITY } else { 0.0 })
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            assertions.push(Assertion::le(
                format!("weighted HL field <= Orlicz field [depth {depth}]"),
                worst,
                1.0 + 1e-9,
            ));
        }
        conditions.push(cond);
        ratios.push(rec);
    }

    for n in 1..ratios.len() {
        let (a, b) = (&ratios[n - 1], &ratios[n]);
        assertions.push(Assertion::le(
            format!("depth stability of ratio [{} -> {}]", a.depth, b.depth),
            b.value,
            STABILITY_FACTOR * a.value,
        ));
        let (ca, cb) = (&conditions[n - 1], &conditions[n]);
        assertions.push(Assertion::le(
            format!("depth stability of condition [{} -> {}]", ca.depth, cb.depth),
            cb.normalized(theorem, q),
            STABILITY_FACTOR * ca.normalized(theorem, q),
        ));
    }

    let verdict = if assertions.iter().all(|a| a.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(Report {
        instance: cfg.clone(),
        condition: conditions.last().expect("depths non-empty").clone(),
        conditions,
        ratios,
        assertions,
        notes,
        verdict,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

/// `C = 2Kφ(2^{2+α})(1 + (Kφ(2^{2+α}))²)` for `φ(t) = t^p`.
pub fn inclusion_constant(alpha: f64, phi_exponent: f64, k: f64) -> f64 {
    let kp = k * 2f64.powf((2.0 + alpha) * phi_exponent);
    2.0 * kp * (1.0 + kp * kp)
}

/// Smallest dyadic cell of the tessellation containing `i`.
pub fn dyadic_container(tess: &Tessellation, i: &Interval) -> Option<Interval> {
    for k in (0..=tess.depth()).rev() {
        let l = tess.cell_len(k);
        if l < i.len() * (1.0 - 1e-12) {
            continue;
        }
        let idx = ((i.a - tess.domain().a) / l).floor();
        if idx < 0.0 || idx as usize >= tess.level_width(k) {
            return None;
        }
        let cell = tess.interval_at(k, idx as usize);
        if cell.contains(i) {
            return Some(cell);
        }
    }
    None
}

/// Lattice intervals at `lattice_depth` that sit inside a dyadic cell at
/// most four times longer, together with every dyadic interval. Returns
/// the family, the container of each member, and how many lattice
/// intervals were left out.
pub fn inclusion_family(tess: &Tessellation, lattice_depth: u32) -> (Vec<Interval>, Vec<Interval>, usize) {
    let mut boxes = tess.dyadic_intervals();
    let mut containers = boxes.clone();
    let mut excluded = 0;
    for i in tess.lattice_intervals(lattice_depth.min(tess.depth())) {
        match dyadic_container(tess, &i) {
            Some(p) if p.len() <= 4.0 * i.len() * (1.0 + 1e-12) => {
                if p != i {
                    boxes.push(i);
                    containers.push(p);
                }
            }
            _ => excluded += 1,
        }
    }
    (boxes, containers, excluded)
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionCheck {
    pub c_used: f64,
    pub lambdas: Vec<f64>,
    /// Cells in the family superlevel set at `λ` but outside the dyadic
    /// superlevel set at `λ/C`, summed over the ladder.
    pub violations: usize,
    pub family_size: usize,
    pub excluded: usize,
    /// Worst `(|Q_P|_ω/|E|_ω) / (K (|Q_P|_α/|E|_α)^p)` over the sampled
    /// doubling pairs and the container pairs.
    pub doubling_worst: f64,
}

/// `n` log-spaced thresholds from `max·1e-3` to `max·0.999`.
pub fn lambda_ladder(max: f64, n: usize) -> Vec<f64> {
    crate::numeric::log_grid(max * 1e-3, max * 0.999, n)
}

/// Level-set inclusion of the family maximal function in the dyadic one at
/// the lemma's constant, for an `(t^{phi_exponent}, k)` α-doubling weight.
#[allow(clippy::too_many_arguments)]
pub fn levelset_inclusion_check(
    f: &GridField,
    phi: &YoungFunction,
    weight: &WeightDescriptor,
    alpha: f64,
    phi_exponent: f64,
    k: f64,
    lattice_depth: u32,
    lambdas: &[f64],
) -> Result<InclusionCheck> {
    let tess = f.tessellation();
    let (boxes, containers, excluded) = inclusion_family(tess, lattice_depth);

    let pairs = dyadic_doubling_pairs(tess, tess.depth(), 2);
    let mut doubling_worst = doubling_report(weight, alpha, &pairs, phi_exponent, k)?.worst_normalized;
    for (i, p) in boxes.iter().zip(&containers) {
        let rw = weight.field.box_mass(alpha, p)? / weight.field.box_mass(alpha, i)?;
        let ra = (p.len() / i.len()).powf(2.0 + alpha);
        doubling_worst = doubling_worst.max(rw / (k * ra.powf(phi_exponent)));
    }
    if doubling_worst > 1.0 + 1e-9 {
        return Err(Error::Usage(format!(
            "weight is not (t^{phi_exponent}, {k}) doubling on the sampled pairs: worst normalized ratio {doubling_worst}"
        )));
    }

    let norms = box_norms(f, phi, &weight.field, alpha, &boxes)?;
    let family = assign_max(tess, &boxes, &norms);
    let dyadic = dyadic_maximal(f, phi, &weight.field, alpha, Shift::Zero)?;
    let c = inclusion_constant(alpha, phi_exponent, k);
    let violations = lambdas
        .iter()
        .map(|&l| {
            family
                .iter()
                .zip(dyadic.values())
                .filter(|(m, d)| **m > l && **d <= l / c)
                .count()
        })
        .sum();
    Ok(InclusionCheck {
        c_used: c,
        lambdas: lambdas.to_vec(),
        violations,
        family_size: boxes.len(),
        excluded,
        doubling_worst,
    })
}
