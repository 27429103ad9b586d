//! Intervals, Carleson squares, shifted dyadic grids and the finite
//! tessellation of a row of Carleson squares into top halves and leaves.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open interval `[a, b)` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!("interval [{a}, {b}) is empty or not finite")));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    #[inline]
    pub fn contains(&self, other: &Interval) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    #[inline]
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.a < other.b && other.a < self.b
    }

    /// The Carleson square `I × (0, |I|]`.
    pub fn carleson(&self) -> Rect {
        Rect {
            x0: self.a,
            x1: self.b,
            y0: 0.0,
            y1: self.len(),
        }
    }

    /// The top half `I × (|I|/2, |I|]`.
    pub fn top_half(&self) -> Rect {
        Rect {
            x0: self.a,
            x1: self.b,
            y0: 0.5 * self.len(),
            y1: self.len(),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.a, self.b)
    }
}

/// Axis-aligned rectangle `[x0, x1) × (y0, y1]` in the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }
}

/// `∫_{y0}^{y1} y^e dy`; `+∞` when the integral diverges at 0.
#[inline]
pub fn y_moment(y0: f64, y1: f64, e: f64) -> f64 {
    if y1 <= y0 {
        return 0.0;
    }
    let k = e + 1.0;
    if k > 0.0 {
        (y1.powf(k) - y0.powf(k)) / k
    } else if y0 <= 0.0 {
        f64::INFINITY
    } else if k == 0.0 {
        (y1 / y0).ln()
    } else {
        (y0.powf(k) - y1.powf(k)) / -k
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > -1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must be > -1, got {alpha}")))
    }
}

/// `∫_R y^α dx dy`.
pub fn rect_alpha_measure(r: &Rect, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(r.x1 > r.x0 && r.y1 > r.y0 && r.y0 >= 0.0) {
        return Err(Error::Domain("rectangle must have positive extents in the upper half-plane".into()));
    }
    Ok((r.x1 - r.x0) * y_moment(r.y0, r.y1, alpha))
}

/// Regions whose `dV_α` measure has a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Carleson(Interval),
    TopHalf(Interval),
    Rect(Rect),
}

impl Region {
    pub fn rect(&self) -> Rect {
        match self {
            Region::Carleson(i) => i.carleson(),
            Region::TopHalf(i) => i.top_half(),
            Region::Rect(r) => *r,
        }
    }
}

/// `|region|_α`.
pub fn alpha_measure(region: &Region, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    match region {
        Region::Carleson(i) => Ok(i.len().powf(alpha + 2.0) / (alpha + 1.0)),
        Region::TopHalf(i) => {
            Ok(i.len().powf(alpha + 2.0) * (1.0 - 2f64.powf(-(alpha + 1.0))) / (alpha + 1.0))
        }
        Region::Rect(r) => rect_alpha_measure(r, alpha),
    }
}

/// `|region ∩ Q|_α`, zero when disjoint.
pub fn region_intersection_measure(region: &Region, q: &Interval, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(match region.rect().intersect(&q.carleson()) {
        Some(r) => (r.x1 - r.x0) * y_moment(r.y0, r.y1, alpha),
        None => 0.0,
    })
}

// ---------------------------------------------------------------------------
// Shifted dyadic grids
// ---------------------------------------------------------------------------

/// Grid shift `β ∈ {0, 1/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shift {
    Zero,
    Third,
}

impl Shift {
    pub const ALL: [Shift; 2] = [Shift::Zero, Shift::Third];

    pub fn as_f64(self) -> f64 {
        match self {
            Shift::Zero => 0.0,
            Shift::Third => 1.0 / 3.0,
        }
    }

    /// Numerator `s` of the signed offset `(−1)^j β = s/3`.
    fn signed_thirds(self, j: i32) -> i64 {
        match self {
            Shift::Zero => 0,
            Shift::Third => {
                if j.rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(Shift::Zero),
            "1/3" => Ok(Shift::Third),
            other => Err(Error::config("beta", format!("expected 0 or 1/3, got {other}"))),
        }
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if x == 0.0 {
            Ok(Shift::Zero)
        } else if (x - 1.0 / 3.0).abs() < 1e-12 {
            Ok(Shift::Third)
        } else {
            Err(Error::config("shifts", format!("shift must be 0 or 1/3, got {x}")))
        }
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shift::Zero => "0",
            Shift::Third => "1/3",
        })
    }
}

impl Serialize for Shift {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Shift {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Shift::from_f64(x).map_err(serde::de::Error::custom),
            Raw::Str(s) => Shift::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Exact value `num / (3 · 2^SCALE)`; covers levels `j ≥ -SCALE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThirdDyadic(i128);

impl ThirdDyadic {
    pub const SCALE: i32 = 62;

    fn new(thirds: i64, j: i32) -> Self {
        assert!((-Self::SCALE..=40).contains(&j), "level {j} outside exact range");
        ThirdDyadic((thirds as i128) << (j + Self::SCALE))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / (3.0 * 2f64.powi(Self::SCALE))
    }

    pub fn numerator(self) -> i128 {
        self.0
    }
}

/// The grid `D^β = {2^j([0,1) + m + (−1)^j β)}` restricted to a level range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedDyadicGrid {
    pub shift: Shift,
    pub j_min: i32,
    pub j_max: i32,
}

impl ShiftedDyadicGrid {
    pub fn new(shift: Shift, j_min: i32, j_max: i32) -> Self {
        Self { shift, j_min, j_max }
    }

    pub fn interval(&self, j: i32, m: i64) -> Interval {
        let scale = 2f64.powi(j);
        let off = self.shift.signed_thirds(j) as f64 / 3.0;
        Interval {
            a: scale * (m as f64 + off),
            b: scale * (m as f64 + 1.0 + off),
        }
    }

    /// Exact endpoints in units of `1 / (3 · 2^SCALE)`.
    pub fn exact_endpoints(&self, j: i32, m: i64) -> (ThirdDyadic, ThirdDyadic) {
        let s = self.shift.signed_thirds(j);
        (ThirdDyadic::new(3 * m + s, j), ThirdDyadic::new(3 * (m + 1) + s, j))
    }

    /// Exact endpoints as rationals.
    pub fn rational_endpoints(&self, j: i32, m: i64) -> (BigRational, BigRational) {
        let s = self.shift.signed_thirds(j);
        let pow = if j >= 0 {
            BigRational::from_integer(BigInt::one() << (j as usize))
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << ((-j) as usize))
        };
        let third = |n: i64| BigRational::new(BigInt::from(n), BigInt::from(3)) * pow.clone();
        (third(3 * m + s), third(3 * (m + 1) + s))
    }

    /// Index `m` of the level-`j` interval whose float image contains `x`.
    pub fn locate(&self, j: i32, x: f64) -> i64 {
        let off = self.shift.signed_thirds(j) as f64 / 3.0;
        (x / 2f64.powi(j) - off).floor() as i64
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Smallest `J ∈ D^0 ∪ D^{1/3}` with `I ⊆ J`, ties toward `β = 0`.
/// Containment is decided in exact rational arithmetic.
pub fn cover_interval(i: &Interval) -> Result<(Shift, Interval)> {
    let len = i.len();
    if !(len > 0.0) {
        return Err(Error::Domain("cover_interval needs |I| > 0".into()));
    }
    let (a, b) = (exact(i.a), exact(i.b));
    let j0 = len.log2().ceil() as i32;
    for j in j0..=j0 + 4 {
        for shift in Shift::ALL {
            let grid = ShiftedDyadicGrid::new(shift, j, j);
            let guess = grid.locate(j, i.a);
            for m in [guess - 1, guess, guess + 1] {
                let (lo, hi) = grid.rational_endpoints(j, m);
                if lo <= a && b <= hi {
                    let cand = grid.interval(j, m);
                    if cand.len() > 6.0 * len {
                        return Err(Error::ContractViolation(format!(
                            "cover of {i} has length {} > 6|I|",
                            cand.len()
                        )));
                    }
                    return Ok((shift, cand));
                }
            }
        }
    }
    Err(Error::ContractViolation(format!("no shifted dyadic cover found for {i}")))
}

/// Two adjacent standard dyadic intervals `J1, J2` (left to right) with
/// `I ⊆ J1 ∪ J2` and `|I| < |J1| = |J2| ≤ 2|I|`. When `I` already fits in
/// one interval of that level, `J2` is its right neighbour.
pub fn two_adjacent_cover(i: &Interval) -> Result<(Interval, Interval)> {
    let len = i.len();
    if !(len > 0.0) {
        return Err(Error::Domain("two_adjacent_cover needs |I| > 0".into()));
    }
    let mut j = len.log2().floor() as i32;
    while 2f64.powi(j) <= len {
        j += 1;
    }
    let grid = ShiftedDyadicGrid::new(Shift::Zero, j, j);
    let m = grid.locate(j, i.a);
    let j1 = grid.interval(j, m);
    let j2 = grid.interval(j, m + 1);
    if !(j1.a <= i.a && i.b <= j2.b) {
        return Err(Error::ContractViolation(format!("two-interval cover failed for {i}")));
    }
    Ok((j1, j2))
}

/// Interval families used for suprema "over all intervals".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalFamily {
    /// Every dyadic interval of the tessellation.
    Dyadic,
    /// Every interval with endpoints on the level-`depth` lattice.
    Lattice { depth: u32 },
    /// The lattice family plus the dyadic intervals finer than the lattice.
    DyadicAndLattice { depth: u32 },
    /// The admissible intervals of one shifted grid.
    Shifted { shift: Shift },
}

// ---------------------------------------------------------------------------
// Tessellation
// ---------------------------------------------------------------------------

/// Config description of a tessellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub root: [f64; 2],
    pub depth: u32,
    #[serde(default = "default_shifts")]
    pub shifts: Vec<Shift>,
    /// Number of equal adjacent root squares the root interval is split into.
    #[serde(default = "one")]
    pub tiles: usize,
}

fn default_shifts() -> Vec<Shift> {
    vec![Shift::Zero, Shift::Third]
}

fn one() -> usize {
    1
}

impl GridSpec {
    /// Padded working domain `[-1, 2)` as three unit roots.
    pub fn padded(depth: u32) -> Self {
        Self {
            root: [-1.0, 2.0],
            depth,
            shifts: default_shifts(),
            tiles: 3,
        }
    }

    pub fn unit(depth: u32) -> Self {
        Self {
            root: [0.0, 1.0],
            depth,
            shifts: default_shifts(),
            tiles: 1,
        }
    }
}

/// Cell identifier; cells are numbered level-major, left to right.
pub type CellId = usize;

/// A row of `roots` adjacent root Carleson squares, each cut to `depth`
/// dyadic levels. Cells at levels `< depth` are top halves, cells at level
/// `depth` are full Carleson squares, so the cells partition the union of
/// the root squares exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    left: f64,
    root_len: f64,
    roots: usize,
    depth: u32,
}

/// Geometry of one cell's overlap with a box.
#[derive(Debug, Clone, Copy)]
pub struct Overlap {
    pub cell: CellId,
    pub x_len: f64,
    pub y0: f64,
    pub y1: f64,
}

pub const MAX_DEPTH: u32 = 20;

impl Tessellation {
    pub fn new(root: Interval, depth: u32, roots: usize) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::Domain(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        if roots == 0 {
            return Err(Error::Domain("need at least one root".into()));
        }
        Ok(Self {
            left: root.a,
            root_len: root.len() / roots as f64,
            roots,
            depth,
        })
    }

    pub fn single(root: Interval, depth: u32) -> Result<Self> {
        Self::new(root, depth, 1)
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        let root = Interval::new(spec.root[0], spec.root[1]).map_err(|e| Error::config("grid.root", e.to_string()))?;
        Self::new(root, spec.depth, spec.tiles).map_err(|e| Error::config("grid.depth", e.to_string()))
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn roots(&self) -> usize {
        self.roots
    }

    pub fn root_len(&self) -> f64 {
        self.root_len
    }

    /// The x-extent of the whole domain.
    pub fn domain(&self) -> Interval {
        Interval {
            a: self.left,
            b: self.left + self.root_len * self.roots as f64,
        }
    }

    pub fn root_interval(&self, t: usize) -> Interval {
        Interval {
            a: self.left + t as f64 * self.root_len,
            b: self.left + (t + 1) as f64 * self.root_len,
        }
    }

    #[inline]
    pub fn level_width(&self, k: u32) -> usize {
        self.roots << k
    }

    #[inline]
    pub fn level_offset(&self, k: u32) -> usize {
        self.roots * ((1usize << k) - 1)
    }

    pub fn num_cells(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    #[inline]
    pub fn cell(&self, k: u32, i: usize) -> CellId {
        debug_assert!(k <= self.depth && i < self.level_width(k));
        self.level_offset(k) + i
    }

    /// `(level, index within level)`.
    pub fn locate(&self, c: CellId) -> (u32, usize) {
        let mut k = 0;
        while self.level_offset(k + 1) <= c {
            k += 1;
        }
        (k, c - self.level_offset(k))
    }

    #[inline]
    pub fn cell_len(&self, k: u32) -> f64 {
        self.root_len / (1u64 << k) as f64
    }

    pub fn interval_at(&self, k: u32, i: usize) -> Interval {
        let l = self.cell_len(k);
        Interval {
            a: self.left + i as f64 * l,
            b: self.left + (i + 1) as f64 * l,
        }
    }

    pub fn interval(&self, c: CellId) -> Interval {
        let (k, i) = self.locate(c);
        self.interval_at(k, i)
    }

    /// y-range of cells at level `k`.
    #[inline]
    pub fn strip(&self, k: u32) -> (f64, f64) {
        let l = self.cell_len(k);
        if k < self.depth {
            (0.5 * l, l)
        } else {
            (0.0, l)
        }
    }

    pub fn region(&self, c: CellId) -> Region {
        let (k, i) = self.locate(c);
        let iv = self.interval_at(k, i);
        if k < self.depth {
            Region::TopHalf(iv)
        } else {
            Region::Carleson(iv)
        }
    }

    pub fn cell_alpha_measure(&self, c: CellId, alpha: f64) -> Result<f64> {
        alpha_measure(&self.region(c), alpha)
    }

    pub fn parent(&self, c: CellId) -> Option<CellId> {
        let (k, i) = self.locate(c);
        (k > 0).then(|| self.cell(k - 1, i / 2))
    }

    /// Index ranges, per level, of the cells in the dyadic subtree rooted at
    /// `(k, i)`, including the node itself.
    pub fn subtree_ranges(&self, k: u32, i: usize) -> impl Iterator<Item = (u32, std::ops::Range<usize>)> + '_ {
        (k..=self.depth).map(move |l| {
            let s = l - k;
            (l, (i << s)..((i + 1) << s))
        })
    }

    /// Does `Q_I` lie inside the tessellated region?
    pub fn admits(&self, i: &Interval) -> bool {
        self.domain().contains(i) && i.len() <= self.root_len * (1.0 + 1e-15)
    }

    /// Calls `visit` for every cell meeting `Q_I`, with the overlap geometry.
    /// Cells are visited level-major, left to right.
    pub fn for_each_overlap<F: FnMut(Overlap)>(&self, q: &Interval, mut visit: F) {
        let h = q.len();
        for k in 0..=self.depth {
            let (s0, s1) = self.strip(k);
            if s0 >= h {
                continue;
            }
            let y1 = s1.min(h);
            let l = self.cell_len(k);
            let width = self.level_width(k);
            let lo = ((q.a - self.left) / l).floor().max(0.0) as usize;
            let hi = (((q.b - self.left) / l).ceil().max(0.0) as usize).min(width);
            let base = self.level_offset(k);
            for i in lo..hi {
                let ca = self.left + i as f64 * l;
                let cb = ca + l;
                let x_len = q.b.min(cb) - q.a.max(ca);
                if x_len > 0.0 {
                    visit(Overlap {
                        cell: base + i,
                        x_len,
                        y0: s0,
                        y1,
                    });
                }
            }
        }
    }

    /// Calls `visit` for every cell whose region lies inside `Q_I`
    /// (equivalently, whose interval lies inside `I`).
    pub fn for_each_contained<F: FnMut(CellId)>(&self, q: &Interval, mut visit: F) {
        for k in 0..=self.depth {
            let l = self.cell_len(k);
            if l > q.len() * (1.0 + 1e-15) {
                continue;
            }
            let width = self.level_width(k);
            let lo = ((q.a - self.left) / l).ceil().max(0.0) as usize;
            let hi = (((q.b - self.left) / l).floor().max(0.0) as usize).min(width);
            let base = self.level_offset(k);
            for i in lo..hi {
                let iv = self.interval_at(k, i);
                if q.contains(&iv) {
                    visit(base + i);
                }
            }
        }
    }

    /// The intervals of `family` admitted by this tessellation, in a fixed
    /// order.
    pub fn family(&self, family: IntervalFamily) -> Vec<Interval> {
        match family {
            IntervalFamily::Dyadic => self.dyadic_intervals(),
            IntervalFamily::Lattice { depth } => self.lattice_intervals(depth.min(self.depth)),
            IntervalFamily::DyadicAndLattice { depth } => {
                let depth = depth.min(self.depth);
                let mut out = self.lattice_intervals(depth);
                out.extend((self.level_offset(depth + 1)..self.num_cells()).map(|c| self.interval(c)));
                out
            }
            IntervalFamily::Shifted { shift } => self.shifted_intervals(shift).into_iter().map(|t| t.2).collect(),
        }
    }

    /// All dyadic intervals of the forest, in cell order.
    pub fn dyadic_intervals(&self) -> Vec<Interval> {
        (0..self.num_cells()).map(|c| self.interval(c)).collect()
    }

    /// All intervals with endpoints on the lattice of spacing
    /// `root_len / 2^lattice_depth` that fit inside the domain.
    pub fn lattice_intervals(&self, lattice_depth: u32) -> Vec<Interval> {
        let n = self.level_width(lattice_depth);
        let max_span = 1usize << lattice_depth;
        let l = self.cell_len(lattice_depth);
        let mut out = Vec::new();
        for s in 0..n {
            for e in s + 1..=(s + max_span).min(n) {
                out.push(Interval {
                    a: self.left + s as f64 * l,
                    b: self.left + e as f64 * l,
                });
            }
        }
        out
    }

    /// Intervals of `D^β` admitted by the domain, with length between the
    /// finest cell length and the root length.
    pub fn shifted_intervals(&self, shift: Shift) -> Vec<(i32, i64, Interval)> {
        let dom = self.domain();
        let j_top = self.root_len.log2().floor() as i32;
        let j_bottom = self.cell_len(self.depth).log2().floor() as i32;
        let mut out = Vec::new();
        for j in (j_bottom..=j_top).rev() {
            let grid = ShiftedDyadicGrid::new(shift, j, j);
            let m_lo = grid.locate(j, dom.a) - 1;
            let m_hi = grid.locate(j, dom.b) + 1;
            for m in m_lo..=m_hi {
                let iv = grid.interval(j, m);
                if self.admits(&iv) {
                    out.push((j, m, iv));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn shifted_interval_examples() {
        let g0 = ShiftedDyadicGrid::new(Shift::Zero, -10, 10);
        assert_eq!(g0.interval(0, 0), unit());
        let g3 = ShiftedDyadicGrid::new(Shift::Third, -10, 10);
        let (lo, hi) = g3.rational_endpoints(0, 0);
        assert_eq!(lo, BigRational::new(1.into(), 3.into()));
        assert_eq!(hi, BigRational::new(4.into(), 3.into()));
        let (lo, hi) = g3.rational_endpoints(1, 0);
        assert_eq!(lo, BigRational::new((-2).into(), 3.into()));
        assert_eq!(hi, BigRational::new(4.into(), 3.into()));
        let iv = g3.interval(1, 0);
        assert!((iv.a + 2.0 / 3.0).abs() < 1e-15 && (iv.b - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cover_examples() {
        let (s, j) = cover_interval(&Interval::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!((s, j), (Shift::Zero, Interval::new(0.0, 0.5).unwrap()));
        let (s, j) = cover_interval(&Interval::new(0.4, 0.9).unwrap()).unwrap();
        assert_eq!((s, j), (Shift::Zero, unit()));
        // Every standard dyadic interval of length <= 1.2 containing 0.9 stops
        // at 1, so the cover comes from the shifted grid. The smallest one is
        // 2^{-1}([0,1) + 2 - 1/3) = [5/6, 4/3); [1/3, 4/3) also covers.
        let i = Interval::new(0.9, 1.1).unwrap();
        let (s, j) = cover_interval(&i).unwrap();
        assert_eq!(s, Shift::Third);
        assert!((j.a - 5.0 / 6.0).abs() < 1e-15 && (j.b - 4.0 / 3.0).abs() < 1e-15);
        let g = ShiftedDyadicGrid::new(Shift::Third, 0, 0);
        assert!(g.interval(0, 0).contains(&i));
        // Oracle: brute-force enumeration of both grids by increasing length.
        let mut best: Option<(f64, Shift)> = None;
        for jj in -4..=2 {
            for sh in Shift::ALL {
                let g = ShiftedDyadicGrid::new(sh, jj, jj);
                for m in -20..20 {
                    let c = g.interval(jj, m);
                    if c.contains(&i) && best.is_none_or(|(l, _)| c.len() < l) {
                        best = Some((c.len(), sh));
                    }
                }
            }
        }
        let (len, sh) = best.unwrap();
        assert!((len - 0.5).abs() < 1e-15 && sh == Shift::Third);
    }

    #[test]
    fn alpha_measure_examples() {
        let q = Region::Carleson(unit());
        assert_eq!(alpha_measure(&q, 0.0).unwrap(), 1.0);
        assert!((alpha_measure(&q, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(alpha_measure(&Region::TopHalf(unit()), 0.0).unwrap(), 0.5);
        assert!(alpha_measure(&q, -1.0).is_err());
        // Rectangle form agrees with the square form.
        let r = Region::Rect(unit().carleson());
        assert!((alpha_measure(&r, 2.3).unwrap() - alpha_measure(&q, 2.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn intersection_examples() {
        let t = Region::TopHalf(unit());
        let half = Interval::new(0.0, 0.5).unwrap();
        assert_eq!(region_intersection_measure(&t, &half, 0.0).unwrap(), 0.0);
        let three_q = Interval::new(0.0, 0.75).unwrap();
        assert!((region_intersection_measure(&t, &three_q, 0.0).unwrap() - 3.0 / 16.0).abs() < 1e-15);
        assert_eq!(region_intersection_measure(&t, &unit(), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn tiling_identity_small_depths() {
        for alpha in [-0.5, 0.0, 1.0, 2.3] {
            for depth in [1, 4, 9, 12] {
                let t = Tessellation::single(Interval::new(0.0, 2.0).unwrap(), depth).unwrap();
                let total: f64 =
                    crate::numeric::compensated_sum((0..t.num_cells()).map(|c| t.cell_alpha_measure(c, alpha).unwrap()));
                let exact = 2f64.powf(alpha + 2.0) / (alpha + 1.0);
                assert!(((total - exact) / exact).abs() < 1e-12, "alpha {alpha} depth {depth}");
            }
        }
    }

    #[test]
    fn cells_are_disjoint_and_nested() {
        let t = Tessellation::new(Interval::new(-1.0, 2.0).unwrap(), 5, 3).unwrap();
        assert_eq!(t.num_cells(), 3 * 63);
        for c in 0..t.num_cells() {
            let (k, i) = t.locate(c);
            assert_eq!(t.cell(k, i), c);
            if let Some(p) = t.parent(c) {
                assert!(t.interval(p).contains(&t.interval(c)));
            }
        }
        // Pairwise disjoint regions: total overlap against each root square is its measure.
        for root in 0..3 {
            let r = t.root_interval(root);
            let mut sum = 0.0;
            t.for_each_overlap(&r, |o| sum += o.x_len * y_moment(o.y0, o.y1, 0.0));
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dyadic_nesting_up_to_depth_eight() {
        let t = Tessellation::single(unit(), 8).unwrap();
        let g = ShiftedDyadicGrid::new(Shift::Zero, -8, 0);
        let mut ends = Vec::new();
        for c in 0..t.num_cells() {
            let (k, i) = t.locate(c);
            ends.push(g.exact_endpoints(-(k as i32), i as i64));
        }
        for (x, &(a0, a1)) in ends.iter().enumerate() {
            for &(b0, b1) in &ends[x + 1..] {
                let disjoint = a1 <= b0 || b1 <= a0;
                let nested = (a0 <= b0 && b1 <= a1) || (b0 <= a0 && a1 <= b1);
                assert!(disjoint || nested);
            }
        }
    }

    #[test]
    fn contained_cells_of_a_dyadic_box_form_its_subtree() {
        let t = Tessellation::single(unit(), 6).unwrap();
        let c = t.cell(2, 1);
        let mut got = Vec::new();
        t.for_each_contained(&t.interval(c), |x| got.push(x));
        let expect: Vec<CellId> = t
            .subtree_ranges(2, 1)
            .flat_map(|(l, r)| r.map(move |i| (l, i)))
            .map(|(l, i)| t.cell(l, i))
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn shifted_family_is_admissible() {
        let t = Tessellation::from_spec(&GridSpec::padded(5)).unwrap();
        let fam = t.shifted_intervals(Shift::Third);
        assert!(!fam.is_empty());
        assert!(fam.iter().all(|(_, _, iv)| t.admits(iv)));
        // [1/3, 4/3) fits in [-1, 2) with unit height.
        assert!(fam.iter().any(|&(j, m, _)| j == 0 && m == 0));
    }

    #[test]
    fn grid_spec_parses_shift_forms() {
        let spec: GridSpec =
            serde_json::from_str(r#"{"root":[0,1],"depth":4,"shifts":[0,0.3333333333333333]}"#).unwrap();
        assert_eq!(spec.shifts, vec![Shift::Zero, Shift::Third]);
        assert_eq!(serde_json::to_string(&Shift::Third).unwrap(), "\"1/3\"");
        let bad = serde_json::from_str::<GridSpec>(r#"{"root":[0,1],"depth":4,"shifts":[0.5]}"#);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn shifted_levels_tile_the_line(j in -20i32..20, m in -1000i64..1000) {
            for shift in Shift::ALL {
                let g = ShiftedDyadicGrid::new(shift, j, j);
                let (_, hi) = g.exact_endpoints(j, m);
                let (lo_next, _) = g.exact_endpoints(j, m + 1);
                prop_assert_eq!(hi, lo_next);
                let (a, b) = g.exact_endpoints(j, m);
                // Length is exactly 2^j.
                prop_assert_eq!(b.numerator() - a.numerator(), 3i128 << (j + ThirdDyadic::SCALE));
            }
        }

        #[test]
        fn two_adjacent_cover_is_sound(a in -8.0f64..8.0, log_len in -6.0f64..0.5) {
            let i = Interval::new(a, a + 10f64.powf(log_len)).unwrap();
            let (j1, j2) = two_adjacent_cover(&i).unwrap();
            prop_assert!(j1.b == j2.a);
            prop_assert!(j1.len() == j2.len());
            prop_assert!(i.len() < j1.len() && j1.len() <= 2.0 * i.len());
            prop_assert!(j1.a <= i.a && i.b <= j2.b);
        }
    }
}
