//! The experiment battery behind `suite`: module checks plus theorem
//! instances with their negative controls.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Expectation, ExperimentConfig, FamilySpec, TheoremId, DEFAULT_SEED};
use crate::error::Result;
use crate::field::{FieldSpec, GridField};
use crate::grid::{cover_interval, GridSpec, Interval, IntervalFamily, Tessellation};
use crate::maximal::dyadic_maximal;
use crate::numeric::log_grid;
use crate::stopping::{carleson_embedding_check, CarlesonSequence, DyadicNorms, StoppingFamily};
use crate::verify::{lambda_ladder, levelset_inclusion_check, theorem_report, Report, Verdict};
use crate::weights::{bekolle_constant, power_weight, WeightDescriptor};
use crate::young::{YoungFunction, YoungSpec};

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub cases: usize,
    /// Worst observed error or ratio, compared against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    fn at_most(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: worst <= tolerance,
            cases,
            worst,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremRecord {
    pub name: String,
    pub expected: Expectation,
    pub verdict: Verdict,
    /// Verdict matches the expectation.
    pub ok: bool,
    pub report: Report,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub quick: bool,
    pub depths: Vec<u32>,
    pub checks: Vec<CheckRecord>,
    pub theorems: Vec<TheoremRecord>,
    pub pass: bool,
    pub runtime_ms: u64,
}

impl SuiteReport {
    /// JSON with every runtime zeroed.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.runtime_ms = 0;
        for t in &mut r.theorems {
            t.report.runtime_ms = 0;
        }
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

fn power_field(s: f64) -> FieldSpec {
    FieldSpec::PowerY { s, scale: 1.0 }
}

fn leaf_mass() -> FieldSpec {
    FieldSpec::LeafMass {
        x: 0.3,
        mass: 1.0,
        alpha: 0.0,
    }
}

fn instance(name: &str, theorem: TheoremId, p: f64, q: f64, omega: FieldSpec, mu: FieldSpec, depths: &[u32]) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.into()),
        theorem: Some(theorem),
        grid: GridSpec::padded(depths[0]),
        p,
        q: Some(q),
        r: (theorem == TheoremId::C1).then_some(1.5),
        omega,
        mu,
        depths: depths.to_vec(),
        lattice_depth: 4.min(depths[0]),
        family: FamilySpec::default(),
        expect: Some(Expectation::Pass),
        ..ExperimentConfig::default()
    }
}

/// Theorem instances: for each theorem one instance satisfying its
/// condition and one negative control whose measure concentrates on a
/// single leaf, so the condition and the ratio grow with depth.
pub fn theorem_battery(depths: &[u32]) -> Vec<ExperimentConfig> {
    use TheoremId::*;
    let mut out = vec![
        instance("T1 y^0.5, mu = omega, p = q = 2", T1, 2.0, 2.0, power_field(0.5), power_field(0.5), depths),
        instance("T1 y^0.5, mu = y^1.75, p = 2, q = 3", T1, 2.0, 3.0, power_field(0.5), power_field(1.75), depths),
        instance("T2 y^0.5, mu = omega, p = 2, q = 1.5", T2, 2.0, 1.5, power_field(0.5), power_field(0.5), depths),
        instance("T3 y^0.3, mu = y^0.6, p = q = 2", T3, 2.0, 2.0, power_field(0.3), power_field(0.6), depths),
        instance("T4 y^0.5, mu = omega, p = q = 2", T4, 2.0, 2.0, power_field(0.5), power_field(0.5), depths),
        instance("T5 y^0.5, mu = omega, p = 2, q = 1.5", T5, 2.0, 1.5, power_field(0.5), power_field(0.5), depths),
        instance("C1 y^0.3, mu = y^0.6, p = q = 2, r = 1.5", C1, 2.0, 2.0, power_field(0.3), power_field(0.6), depths),
    ];
    let unit = FieldSpec::Constant { value: 1.0 };
    for (theorem, p, q, omega) in [
        (T1, 2.0, 2.0, power_field(0.5)),
        (T2, 2.0, 1.5, power_field(0.5)),
        (T3, 2.0, 2.0, unit.clone()),
        (T4, 2.0, 2.0, power_field(0.5)),
        (T5, 2.0, 1.5, power_field(0.5)),
        (C1, 2.0, 2.0, power_field(0.3)),
    ] {
        let mut cfg = instance(&format!("{theorem} negative control: leaf point mass"), theorem, p, q, omega, leaf_mass(), depths);
        cfg.expect = Some(Expectation::Fail);
        out.push(cfg);
    }
    out
}

fn tess(depth: u32) -> Arc<Tessellation> {
    Arc::new(Tessellation::single(Interval { a: 0.0, b: 1.0 }, depth).expect("valid depth"))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn tiling_check() -> Result<CheckRecord> {
    let t = Tessellation::single(Interval { a: 0.0, b: 1.0 }, 10)?;
    let mut worst = 0.0_f64;
    for alpha in [-0.5, 0.0, 1.0, 2.3] {
        let total: f64 = (0..t.num_cells())
            .map(|c| t.cell_alpha_measure(c, alpha))
            .collect::<Result<crate::numeric::CompensatedSum>>()?
            .value();
        worst = worst.max(rel(total, 1.0 / (alpha + 1.0)));
    }
    Ok(CheckRecord::at_most("tiling identity", 4, worst, 1e-12))
}

fn luxembourg_check(fields: usize) -> Result<CheckRecord> {
    let t = tess(6);
    let root = t.root_interval(0);
    let errs: Vec<f64> = (0..fields as u64)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let f = GridField::seeded(t.clone(), DEFAULT_SEED + j, 1e-2, 1e2, None)?;
            let w = GridField::seeded(t.clone(), DEFAULT_SEED + 1000 + j, 0.5, 2.0, None)?;
            let mut worst = 0.0_f64;
            for p in [1.5, 2.0, 3.0] {
                let lux = f.luxembourg_norm(&root, &YoungFunction::power(p)?, &w, 0.5)?;
                let avg = (f.lp_norm_pow(&w, 0.5, p)? / w.box_mass(0.5, &root)?).powf(1.0 / p);
                worst = worst.max(rel(lux, avg));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(CheckRecord::at_most(
        "Luxembourg norm equals p-average for powers",
        3 * fields,
        errs.into_iter().fold(0.0, f64::max),
        1e-8,
    ))
}

/// Normalised built-in Young functions.
pub fn builtin_young() -> Vec<YoungFunction> {
    [
        YoungSpec::Power { a: 1.0 },
        YoungSpec::Power { a: 1.5 },
        YoungSpec::Power { a: 3.0 },
        YoungSpec::PowerLog { a: 1.5, b: 1.0 },
        YoungSpec::Table {
            points: vec![[1.0, 1.0], [2.0, 3.0], [4.0, 8.0]],
        },
    ]
    .iter()
    .map(|s| YoungFunction::from_spec(s).expect("valid built-in"))
    .collect()
}

fn indicator_norm_check(depth: u32) -> Result<CheckRecord> {
    let t = tess(depth);
    let one = GridField::constant(t.clone(), 1.0)?;
    let phis = builtin_young();
    let boxes = t.dyadic_intervals();
    let worst = boxes
        .par_iter()
        .map(|i| -> Result<f64> {
            let chi = GridField::indicator(t.clone(), i);
            let mut w = 0.0_f64;
            for phi in &phis {
                w = w.max((chi.luxembourg_norm(i, phi, &one, 0.0)? - 1.0).abs());
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CheckRecord::at_most("indicator norm is one", boxes.len() * phis.len(), worst, 1e-10))
}

fn sandwich_check(points: usize) -> Result<CheckRecord> {
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for phi in [YoungFunction::power(1.5)?, YoungFunction::power(3.0)?, YoungFunction::power_log(1.5, 1.0)?] {
        let psi = phi.conjugate();
        for t in log_grid(1e-6, 1e6, points) {
            let prod = phi.inverse(t)? * psi.inverse(t)?;
            // Excess below t or above 2t, relative.
            worst = worst.max((t - prod) / t).max((prod - 2.0 * t) / (2.0 * t));
            cases += 1;
        }
    }
    Ok(CheckRecord::at_most("t <= inverse(t) conjugate-inverse(t) <= 2t", cases, worst, 1e-9))
}

fn power_weight_check() -> Result<CheckRecord> {
    let t = tess(6);
    let mut worst = 0.0_f64;
    for (s, p, alpha) in [(0.5, 2.0, 0.0), (-0.3, 2.0, 0.5), (0.8, 3.0, 1.0)] {
        let w = power_weight(t.clone(), s, alpha, p)?;
        let predicted = w.predicted.and_then(|x| x.2).unwrap_or(f64::NAN);
        let measured = bekolle_constant(&w, p, alpha, IntervalFamily::Dyadic)?.constant;
        let e = rel(measured, predicted);
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    Ok(CheckRecord::at_most("power weight B_p constants", 3, worst, 1e-6))
}

fn covering_check(n: usize) -> Result<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let a: f64 = rng.gen_range(-4.0..4.0);
        let len = 10f64.powf(rng.gen_range(-6.0..1.0));
        let i = Interval::new(a, a + len)?;
        let ratio = match cover_interval(&i) {
            Ok((_, j)) if j.contains(&i) => j.len() / i.len(),
            _ => f64::INFINITY,
        };
        worst = worst.max(ratio);
    }
    Ok(CheckRecord::at_most("one-third covering with |J| <= 6|I|", n, worst, 6.0))
}

fn stopping_check(cases: usize) -> Result<CheckRecord> {
    let t = tess(6);
    let phi = YoungFunction::power(1.5)?;
    let failures: usize = (0..cases as u64)
        .into_par_iter()
        .map(|j| -> Result<usize> {
            let f = GridField::seeded(t.clone(), DEFAULT_SEED + j, 1e-2, 1e2, None)?;
            let w = GridField::seeded(t.clone(), DEFAULT_SEED + 5000 + j, 0.5, 2.0, None)?;
            let norms = DyadicNorms::compute(&f, &phi, &w, 0.0)?;
            let maximal = norms.maximal();
            let top = maximal.iter().cloned().fold(0.0, f64::max);
            let lambda = top * (0.05 + 0.9 * (j as f64 + 0.5) / cases as f64);
            Ok(usize::from(!StoppingFamily::from_norms(&norms, lambda)?.check(&norms, &maximal).all()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(CheckRecord::at_most("stopping family invariants", cases, failures as f64, 0.0))
}

/// `(p·2^{p−a}/(p−a))^{1/p}`.
pub fn strong_type_bound(p: f64, a: f64) -> f64 {
    (p * 2f64.powf(p - a) / (p - a)).powf(1.0 / p)
}

fn strong_type_check(fields: usize) -> Result<CheckRecord> {
    let t = tess(6);
    let worst = (0..fields as u64)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let f = GridField::seeded(t.clone(), DEFAULT_SEED + j, 1e-2, 1e2, None)?;
            let w = GridField::seeded(t.clone(), DEFAULT_SEED + 7000 + j, 0.5, 2.0, None)?;
            let mut worst = 0.0_f64;
            for (a, p) in [(1.0, 1.5), (1.5, 2.0), (2.0, 3.0)] {
                let m = dyadic_maximal(&f, &YoungFunction::power(a)?, &w, 0.0, crate::grid::Shift::Zero)?;
                let ratio = m.field.lp_norm(&w, 0.0, p)? / f.lp_norm(&w, 0.0, p)?;
                worst = worst.max(ratio / strong_type_bound(p, a));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CheckRecord::at_most("strong-type constant", 3 * fields, worst, 1.0 + 1e-6))
}

fn embedding_check(fields: usize) -> Result<CheckRecord> {
    let t = tess(6);
    let phi = YoungFunction::power(1.5)?;
    let weights = vec![
        GridField::constant(t.clone(), 1.0)?,
        GridField::power_y(t.clone(), 0.5, 1.0)?,
        GridField::power_y(t.clone(), -0.3, 1.0)?,
        GridField::seeded(t.clone(), DEFAULT_SEED, 0.5, 2.0, None)?,
    ];
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for w in &weights {
        for gamma in [1.0, 1.25] {
            let seq = CarlesonSequence::box_masses(w, 0.0, gamma)?;
            for j in 0..fields as u64 {
                let f = GridField::seeded(t.clone(), DEFAULT_SEED + 300 + j, 1e-2, 1e2, None)?;
                let chk = carleson_embedding_check(&seq, &f, &phi, 2.0)?;
                worst = worst.max(chk.lhs / chk.bound);
                cases += 1;
            }
        }
    }
    Ok(CheckRecord::at_most("Carleson embedding", cases, worst, 1.0 + 1e-8))
}

fn inclusion_check(fields: usize) -> Result<CheckRecord> {
    let t = tess(6);
    let phi = YoungFunction::power(1.5)?;
    let mut violations = 0;
    for j in 0..fields as u64 {
        let f = GridField::seeded(t.clone(), DEFAULT_SEED + 900 + j, 1e-2, 1e2, None)?;
        // ω ≡ 1 is (t, 1)-doubling; cell values in [1/2, 2] make ω (t, 4)-doubling.
        let (w, k) = if j % 2 == 0 {
            (GridField::constant(t.clone(), 1.0)?, 1.0)
        } else {
            (GridField::seeded(t.clone(), DEFAULT_SEED + 950 + j, 0.5, 2.0, None)?, 4.0)
        };
        let w = WeightDescriptor::new(w)?;
        let top = dyadic_maximal(&f, &phi, &w.field, 0.0, crate::grid::Shift::Zero)?
            .values()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let chk = levelset_inclusion_check(&f, &phi, &w, 0.0, 1.0, k, 4, &lambda_ladder(top, 20))?;
        violations += chk.violations;
    }
    Ok(CheckRecord::at_most("level-set inclusion", fields * 20, violations as f64, 0.0))
}

/// Runs the battery; `quick` uses fewer seeded cases and depths `[5, 6]`.
pub fn run_suite(quick: bool) -> Result<SuiteReport> {
    let start = Instant::now();
    let (n, depths) = if quick { (20, vec![5, 6]) } else { (100, vec![6, 7, 8, 9]) };
    let checks = vec![
        tiling_check()?,
        luxembourg_check(n)?,
        indicator_norm_check(if quick { 6 } else { 8 })?,
        sandwich_check(if quick { 61 } else { 121 })?,
        power_weight_check()?,
        covering_check(10_000)?,
        stopping_check(if quick { 50 } else { 200 })?,
        strong_type_check(n)?,
        embedding_check(if quick { 4 } else { 10 })?,
        inclusion_check(if quick { 3 } else { 10 })?,
    ];
    let theorems = theorem_battery(&depths)
        .into_iter()
        .map(|cfg| -> Result<TheoremRecord> {
            let report = theorem_report(&cfg)?;
            let expected = cfg.expect.unwrap_or(Expectation::Pass);
            let ok = matches!(
                (expected, report.verdict),
                (Expectation::Pass, Verdict::Pass) | (Expectation::Fail, Verdict::Fail)
            );
            Ok(TheoremRecord {
                name: cfg.name.clone().unwrap_or_default(),
                expected,
                verdict: report.verdict,
                ok,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = checks.iter().all(|c| c.pass) && theorems.iter().all(|t| t.ok);
    Ok(SuiteReport {
        quick,
        depths,
        checks,
        theorems,
        pass,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_valid_and_balanced() {
        let b = theorem_battery(&[5, 6]);
        for cfg in &b {
            cfg.validate().unwrap();
        }
        for t in TheoremId::ALL {
            let of = |e| b.iter().filter(|c| c.theorem == Some(t) && c.expect == Some(e)).count();
            assert!(of(Expectation::Pass) >= 1 && of(Expectation::Fail) == 1, "{t}");
        }
    }

    #[test]
    fn strong_type_bound_value() {
        // (2·2^1/1)^{1/2} = 2
        assert!((strong_type_bound(2.0, 1.0) - 2.0).abs() < 1e-15);
        // (3·2^1/1)^{1/3} = 6^{1/3}
        assert!((strong_type_bound(3.0, 2.0) - 6f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn small_checks_pass() {
        for c in [tiling_check().unwrap(), power_weight_check().unwrap(), covering_check(500).unwrap(), stopping_check(5).unwrap()] {
            assert!(c.pass, "{c:?}");
        }
    }
}
