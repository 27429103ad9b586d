//! Nonnegative cell-wise densities on a tessellation, their weighted box
//! integrals, `L^p` norms and Luxembourg norms over Carleson squares.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{y_moment, CellId, Interval, Tessellation};
use crate::numeric::CompensatedSum;
use crate::young::YoungFunction;

/// Relative tolerance of the Luxembourg bisection.
pub const LUX_RTOL: f64 = 1e-10;
/// Iteration cap of the Luxembourg bisection.
pub const LUX_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Density {
    Cells(Arc<Vec<f64>>),
    /// `scale · y^s`, integrated exactly.
    PowerY { s: f64, scale: f64 },
}

/// A nonnegative density against `dV_α` on a tessellation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    tess: Arc<Tessellation>,
    density: Density,
}

/// Config description of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Indicator {
        interval: [f64; 2],
    },
    Constant {
        value: f64,
    },
    PowerY {
        s: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    Seeded {
        seed: u64,
        #[serde(default = "loguniform")]
        law: String,
        range: [f64; 2],
        /// Restrict the support to cells whose interval lies in this window.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<[f64; 2]>,
    },
    Cells {
        values: Vec<f64>,
    },
    /// Density concentrated on the finest leaf containing `x`, carrying
    /// total `dV_α` mass `mass`.
    LeafMass {
        x: f64,
        mass: f64,
        alpha: f64,
    },
    /// A multiple of another field.
    Scaled {
        factor: f64,
        of: Box<FieldSpec>,
    },
}

fn unit_scale() -> f64 {
    1.0
}

fn loguniform() -> String {
    "loguniform".into()
}

fn check_value(v: f64, cell: usize) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("density on cell {cell} must be finite and >= 0, got {v}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > -1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must be > -1, got {alpha}")))
    }
}

impl GridField {
    pub fn cells(tess: Arc<Tessellation>, values: Vec<f64>) -> Result<Self> {
        if values.len() != tess.num_cells() {
            return Err(Error::Usage(format!(
                "field has {} values, tessellation has {} cells",
                values.len(),
                tess.num_cells()
            )));
        }
        for (c, &v) in values.iter().enumerate() {
            check_value(v, c)?;
        }
        Ok(Self {
            tess,
            density: Density::Cells(Arc::new(values)),
        })
    }

    pub fn constant(tess: Arc<Tessellation>, value: f64) -> Result<Self> {
        check_value(value, 0)?;
        let n = tess.num_cells();
        Self::cells(tess, vec![value; n])
    }

    /// `χ_{Q_J}` at cell granularity: one on cells whose region lies in `Q_J`.
    pub fn indicator(tess: Arc<Tessellation>, j: &Interval) -> Self {
        let mut values = vec![0.0; tess.num_cells()];
        tess.for_each_contained(j, |c| values[c] = 1.0);
        Self {
            tess,
            density: Density::Cells(Arc::new(values)),
        }
    }

    /// `scale · y^s` with exact cell masses.
    pub fn power_y(tess: Arc<Tessellation>, s: f64, scale: f64) -> Result<Self> {
        if !(s.is_finite() && scale.is_finite() && scale >= 0.0) {
            return Err(Error::Domain(format!("power_y needs finite s and scale >= 0, got s={s}, scale={scale}")));
        }
        Ok(Self {
            tess,
            density: Density::PowerY { s, scale },
        })
    }

    /// Independent log-uniform values in `[lo, hi]` on the cells whose
    /// interval lies in `support` (all cells when `None`), zero elsewhere.
    pub fn seeded(tess: Arc<Tessellation>, seed: u64, lo: f64, hi: f64, support: Option<&Interval>) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Domain(format!("seeded range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (llo, lhi) = (lo.ln(), hi.ln());
        let values = (0..tess.num_cells())
            .map(|c| {
                let u: f64 = rng.gen();
                let inside = support.is_none_or(|s| s.contains(&tess.interval(c)));
                if inside {
                    (llo + u * (lhi - llo)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        Self::cells(tess, values)
    }

    /// Density on the finest leaf containing `x` with `∫ density dV_α = mass`.
    pub fn leaf_mass(tess: Arc<Tessellation>, x: f64, mass: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let dom = tess.domain();
        if !(x >= dom.a && x < dom.b) {
            return Err(Error::Domain(format!("point {x} outside the domain {dom}")));
        }
        let d = tess.depth();
        let l = tess.cell_len(d);
        let i = (((x - dom.a) / l).floor() as usize).min(tess.level_width(d) - 1);
        let c = tess.cell(d, i);
        let leaf_measure = tess.cell_alpha_measure(c, alpha)?;
        let mut values = vec![0.0; tess.num_cells()];
        values[c] = mass / leaf_measure;
        Self::cells(tess, values)
    }

    pub fn from_spec(spec: &FieldSpec, tess: Arc<Tessellation>, key: &str) -> Result<Self> {
        let cfg = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config(key, other.to_string()),
        };
        match spec {
            FieldSpec::Indicator { interval } => {
                let j = Interval::new(interval[0], interval[1]).map_err(cfg)?;
                Ok(Self::indicator(tess, &j))
            }
            FieldSpec::Constant { value } => Self::constant(tess, *value).map_err(cfg),
            FieldSpec::PowerY { s, scale } => Self::power_y(tess, *s, *scale).map_err(cfg),
            FieldSpec::Seeded {
                seed,
                law,
                range,
                support,
            } => {
                if law != "loguniform" {
                    return Err(Error::config(format!("{key}.law"), format!("unknown law `{law}`")));
                }
                let support = match support {
                    Some([a, b]) => Some(Interval::new(*a, *b).map_err(cfg)?),
                    None => None,
                };
                Self::seeded(tess, *seed, range[0], range[1], support.as_ref()).map_err(cfg)
            }
            FieldSpec::Cells { values } => Self::cells(tess, values.clone()).map_err(cfg),
            FieldSpec::LeafMass { x, mass, alpha } => Self::leaf_mass(tess, *x, *mass, *alpha).map_err(cfg),
            FieldSpec::Scaled { factor, of } => {
                if !(factor.is_finite() && *factor >= 0.0) {
                    return Err(Error::config(format!("{key}.factor"), "must be finite and >= 0"));
                }
                Ok(Self::from_spec(of, tess, key)?.scale(*factor))
            }
        }
    }

    pub fn tessellation(&self) -> &Arc<Tessellation> {
        &self.tess
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.density, Density::PowerY { .. })
    }

    /// Exponent `s` when the field is `scale · y^s`.
    pub fn power_exponent(&self) -> Option<f64> {
        self.power_params().map(|p| p.0)
    }

    /// `(s, scale)` when the field is `scale · y^s`.
    pub fn power_params(&self) -> Option<(f64, f64)> {
        match self.density {
            Density::PowerY { s, scale } => Some((s, scale)),
            Density::Cells(_) => None,
        }
    }

    /// Stored cell values; `None` for analytic fields.
    pub fn values(&self) -> Option<&[f64]> {
        match &self.density {
            Density::Cells(v) => Some(v),
            Density::PowerY { .. } => None,
        }
    }

    /// Coefficient and y-exponent of the density on `c`.
    #[inline]
    fn part(&self, c: CellId) -> (f64, f64) {
        match &self.density {
            Density::Cells(v) => (v[c], 0.0),
            Density::PowerY { s, scale } => (*scale, *s),
        }
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        Arc::ptr_eq(&self.tess, &other.tess) || *self.tess == *other.tess
    }

    fn require_same_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Usage("fields live on different tessellations".into()))
        }
    }

    pub fn scale(&self, factor: f64) -> GridField {
        let density = match &self.density {
            Density::Cells(v) => Density::Cells(Arc::new(v.iter().map(|x| x * factor).collect())),
            Density::PowerY { s, scale } => Density::PowerY {
                s: *s,
                scale: scale * factor,
            },
        };
        GridField {
            tess: self.tess.clone(),
            density,
        }
    }

    /// Pointwise power `field^r`; zero cells stay zero for `r > 0` and are
    /// rejected for `r <= 0`.
    pub fn powf(&self, r: f64) -> Result<GridField> {
        let density = match &self.density {
            Density::Cells(v) => {
                let mut out = Vec::with_capacity(v.len());
                for (c, &x) in v.iter().enumerate() {
                    if x == 0.0 && r <= 0.0 {
                        return Err(Error::Nondegeneracy { cell: c });
                    }
                    out.push(x.powf(r));
                }
                Density::Cells(Arc::new(out))
            }
            Density::PowerY { s, scale } => {
                if *scale == 0.0 && r <= 0.0 {
                    return Err(Error::Nondegeneracy { cell: 0 });
                }
                Density::PowerY {
                    s: s * r,
                    scale: scale.powf(r),
                }
            }
        };
        Ok(GridField {
            tess: self.tess.clone(),
            density,
        })
    }

    /// Cell-wise values `f(v_c)`; analytic fields are first replaced by
    /// their cell `α`-averages.
    pub fn map_cells<F: Fn(f64) -> f64>(&self, alpha: f64, f: F) -> Result<GridField> {
        let base = self.cell_averages(alpha)?;
        Self::cells(self.tess.clone(), base.iter().map(|&x| f(x)).collect())
    }

    /// Cell-wise `α`-average of the density (the stored value for cell
    /// fields).
    pub fn cell_averages(&self, alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        match &self.density {
            Density::Cells(v) => Ok(v.to_vec()),
            Density::PowerY { s, scale } => (0..self.tess.num_cells())
                .map(|c| {
                    let (k, _) = self.tess.locate(c);
                    let (y0, y1) = self.tess.strip(k);
                    let num = y_moment(y0, y1, alpha + s);
                    let den = y_moment(y0, y1, alpha);
                    let avg = scale * num / den;
                    if avg.is_finite() {
                        Ok(avg)
                    } else {
                        Err(Error::Domain(format!("y^{s} is not locally integrable against dV_{alpha}")))
                    }
                })
                .collect(),
        }
    }

    /// Cell-wise values as a cell field (analytic fields via `α`-averages).
    pub fn to_cells(&self, alpha: f64) -> Result<GridField> {
        Self::cells(self.tess.clone(), self.cell_averages(alpha)?)
    }

    /// Cell-wise maximum of two fields given as cell values.
    pub fn max(&self, other: &GridField) -> Result<GridField> {
        self.require_same_grid(other)?;
        match (&self.density, &other.density) {
            (Density::Cells(a), Density::Cells(b)) => {
                Self::cells(self.tess.clone(), a.iter().zip(b.iter()).map(|(x, y)| x.max(*y)).collect())
            }
            _ => Err(Error::Usage("max needs cell fields".into())),
        }
    }

    /// `∫_{cell} field dV_α` over the whole cell.
    pub fn cell_mass(&self, c: CellId, alpha: f64) -> f64 {
        let (k, _) = self.tess.locate(c);
        let (y0, y1) = self.tess.strip(k);
        let (coef, s) = self.part(c);
        if coef == 0.0 {
            return 0.0;
        }
        coef * self.tess.cell_len(k) * y_moment(y0, y1, alpha + s)
    }

    /// Per-cell masses `∫_{cell} field dV_α`, in cell order.
    pub fn cell_masses(&self, alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        Ok((0..self.tess.num_cells()).map(|c| self.cell_mass(c, alpha)).collect())
    }

    /// `(f_c, ∫_{cell ∩ Q} ω dV_α)` for every cell meeting `Q`, with the
    /// total mass. `f` must be a cell field.
    fn box_terms(&self, weight: &GridField, alpha: f64, q: &Interval) -> Result<(Vec<(f64, f64)>, f64)> {
        self.require_same_grid(weight)?;
        check_alpha(alpha)?;
        let vals = self
            .values()
            .ok_or_else(|| Error::Usage("the Luxembourg norm needs a cell field".into()))?;
        let mut terms = Vec::new();
        let mut total = CompensatedSum::new();
        self.tess.for_each_overlap(q, |o| {
            let (coef, s) = weight.part(o.cell);
            let m = if coef == 0.0 {
                0.0
            } else {
                coef * o.x_len * y_moment(o.y0, o.y1, alpha + s)
            };
            total.add(m);
            let v = vals[o.cell];
            if v > 0.0 && m > 0.0 {
                terms.push((v, m));
            }
        });
        Ok((terms, total.value()))
    }

    /// Luxembourg norm `‖f‖_{Q,Φ,ω,α}`.
    pub fn luxembourg_norm(&self, q: &Interval, phi: &YoungFunction, weight: &GridField, alpha: f64) -> Result<f64> {
        let (terms, total) = self.box_terms(weight, alpha, q)?;
        if !(total > 0.0) {
            return Err(Error::DegenerateBox { interval: (q.a, q.b) });
        }
        Ok(luxembourg_from_terms(&terms, total, phi))
    }

    /// `∫_Q f ω dV_α`.
    pub fn integrate(&self, weight: &GridField, alpha: f64, q: &Interval) -> Result<f64> {
        self.require_same_grid(weight)?;
        check_alpha(alpha)?;
        let mut acc = CompensatedSum::new();
        self.tess.for_each_overlap(q, |o| {
            let (cf, sf) = self.part(o.cell);
            let (cw, sw) = weight.part(o.cell);
            let coef = cf * cw;
            if coef != 0.0 {
                acc.add(coef * o.x_len * y_moment(o.y0, o.y1, alpha + sf + sw));
            }
        });
        Ok(acc.value())
    }

    /// `|Q_I|_{ω,α}` restricted to the domain.
    pub fn box_mass(&self, alpha: f64, i: &Interval) -> Result<f64> {
        check_alpha(alpha)?;
        let mut acc = CompensatedSum::new();
        self.tess.for_each_overlap(i, |o| {
            let (coef, s) = self.part(o.cell);
            if coef != 0.0 {
                acc.add(coef * o.x_len * y_moment(o.y0, o.y1, alpha + s));
            }
        });
        Ok(acc.value())
    }

    /// `|Q_I|_{ω,α}` and whether `Q_I` leaves the tessellated region.
    pub fn box_mass_flagged(&self, alpha: f64, i: &Interval) -> Result<(f64, bool)> {
        Ok((self.box_mass(alpha, i)?, !self.tess.admits(i)))
    }

    /// `(∫ g^p ω dV_α)^{1/p}` over the whole tessellation.
    pub fn lp_norm(&self, weight: &GridField, alpha: f64, p: f64) -> Result<f64> {
        Ok(self.lp_norm_pow(weight, alpha, p)?.powf(1.0 / p))
    }

    /// `∫ g^p ω dV_α` over the whole tessellation.
    pub fn lp_norm_pow(&self, weight: &GridField, alpha: f64, p: f64) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("lp_norm needs p >= 1, got {p}")));
        }
        self.require_same_grid(weight)?;
        check_alpha(alpha)?;
        let mut acc = CompensatedSum::new();
        for c in 0..self.tess.num_cells() {
            let (cg, sg) = self.part(c);
            let (cw, sw) = weight.part(c);
            if cg == 0.0 || cw == 0.0 {
                continue;
            }
            let (k, _) = self.tess.locate(c);
            let (y0, y1) = self.tess.strip(k);
            acc.add(cg.powf(p) * cw * self.tess.cell_len(k) * y_moment(y0, y1, alpha + sg * p + sw));
        }
        Ok(acc.value())
    }
}

/// Luxembourg norm from `(value, mass)` pairs of the support and the total
/// mass `S` of the box: the least `λ` with `Σ m Φ(v/λ) ≤ S`.
pub fn luxembourg_from_terms(terms: &[(f64, f64)], total: f64, phi: &YoungFunction) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let (mut vmin, mut vmax) = (f64::INFINITY, 0.0_f64);
    for &(v, _) in terms {
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    if vmin == vmax {
        // Φ(c/λ)·M/S = 1.
        let support: f64 = terms.iter().map(|t| t.1).collect::<CompensatedSum>().value();
        let r = phi.inverse_unchecked(total / support);
        return if r > 0.0 { vmin / r } else { f64::INFINITY };
    }
    if phi.power_exponent() == Some(1.0) {
        // Φ(t) = t: the norm is the weighted average.
        let num: f64 = terms.iter().map(|&(v, m)| v * m).collect::<CompensatedSum>().value();
        return num / total;
    }
    // G(λ) − 1.
    let g = |lambda: f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for &(v, m) in terms {
            acc.add(m * phi.value(v / lambda));
        }
        acc.value() / total - 1.0
    };
    let mut hi = vmax;
    let mut ghi = g(hi);
    let mut grow = 0;
    while ghi > 0.0 && grow < 1100 {
        hi *= 2.0;
        ghi = g(hi);
        grow += 1;
    }
    let mut lo = 0.5 * hi;
    let mut glo = g(lo);
    while glo <= 0.0 {
        hi = lo;
        ghi = glo;
        lo *= 0.5;
        glo = g(lo);
        if lo < f64::MIN_POSITIVE {
            return hi;
        }
    }
    // Bracketing solve with the invariant G(lo) > 1 >= G(hi): false position
    // with the Illinois correction, falling back to bisection whenever the
    // secant step is unusable or the bracket stops shrinking fast.
    let mut last_kept: i8 = 0;
    let mut width = hi - lo;
    for _ in 0..LUX_MAX_ITER {
        if hi - lo <= LUX_RTOL * hi {
            break;
        }
        let secant = (lo * ghi - hi * glo) / (ghi - glo);
        let mid = if glo.is_finite() && secant > lo && secant < hi && hi - lo <= 0.5 * width {
            secant
        } else {
            width = hi - lo;
            0.5 * (lo + hi)
        };
        let gm = g(mid);
        if gm > 0.0 {
            lo = mid;
            glo = gm;
            if last_kept == 1 {
                ghi *= 0.5;
            }
            last_kept = 1;
        } else {
            hi = mid;
            ghi = gm;
            if last_kept == -1 {
                glo *= 0.5;
            }
            last_kept = -1;
        }
    }
    hi
}
