//! Adaptive major/minor dyadic refinement under a holomorphic map.
//!
//! A square is *minor* when `derivative_bound(h, Q) · diam Q ≤ target`, and
//! *major* otherwise. Majors are split into four children level by level
//! until none remain. Area is tracked in integer units of the finest
//! admissible level, so conservation is exact.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmaps::{MapExpr, Square};
use crate::dimension::least_squares_slope;
use crate::error::{Error, Result};
use crate::pointset::{Point, PointSet};

pub const DEFAULT_MAX_LEVEL: u32 = 40;
/// Area units are `4^(MAX_SUPPORTED_LEVEL − level)`; must fit in `u128`.
const MAX_SUPPORTED_LEVEL: u32 = 60;

/// Scale schedule tying image radii to source radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineSchedule {
    pub r_prime: f64,
    pub d: u32,
    pub alpha: f64,
    pub p: f64,
    /// Spectrum parameter; `None` drops the `r′_j ≤ (R′)^{1/θ}` constraint.
    pub theta: Option<f64>,
}

impl RefineSchedule {
    pub fn new(r_prime: f64, d: u32, alpha: f64, p: f64, theta: Option<f64>) -> Result<Self> {
        if !(r_prime > 0.0 && r_prime < 0.5) {
            return Err(Error::Domain(format!(
                "R' must lie in (0, 1/2), got {r_prime}"
            )));
        }
        if d < 1 {
            return Err(Error::Domain("degree must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::Domain(format!("p must exceed 2, got {p}")));
        }
        if let Some(t) = theta {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Domain(format!("theta must lie in (0,1), got {t}")));
            }
        }
        Ok(Self {
            r_prime,
            d,
            alpha,
            p,
            theta,
        })
    }

    /// `β = pα/(p−2+α)`.
    pub fn beta(&self) -> f64 {
        self.p * self.alpha / (self.p - 2.0 + self.alpha)
    }

    /// Source radius `R = (2R′)^{1/d}`.
    pub fn radius(&self) -> f64 {
        (2.0 * self.r_prime).powf(1.0 / self.d as f64)
    }

    /// Image target `r′_j = 2^{−jα/β}·R′`.
    pub fn r_prime_j(&self, j: u32) -> f64 {
        (-(j as f64) * self.alpha / self.beta()).exp2() * self.r_prime
    }

    /// Source side `r_j = 2^{−j}·R`.
    pub fn r_j(&self, j: u32) -> f64 {
        (-(j as f64)).exp2() * self.radius()
    }

    /// Smallest `j ≥ 1` with `r′_j ≤ (R′)^{1/θ}`; 1 without a θ-constraint.
    pub fn j0(&self) -> u32 {
        let Some(theta) = self.theta else { return 1 };
        let cap = self.r_prime.powf(1.0 / theta);
        let guess =
            ((1.0 / theta - 1.0) * (self.beta() / self.alpha) * -self.r_prime.log2()).ceil();
        let mut j = guess.max(1.0) as u32;
        while j > 1 && self.r_prime_j(j - 1) <= cap {
            j -= 1;
        }
        while self.r_prime_j(j) > cap {
            j += 1;
        }
        j
    }

    /// Root square `Q(0,R) = [−R,R]²`.
    pub fn root(&self) -> Square {
        let r = self.radius();
        Square::new(-r, -r, 2.0 * r)
    }
}

/// Dyadic sub-square of a root: `level` halvings, integer position `(ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub level: u32,
    pub ix: u64,
    pub iy: u64,
}

impl DyadicSquare {
    pub fn geometry(&self, root: &Square) -> Square {
        let side = root.side * (-(self.level as f64)).exp2();
        Square::new(
            root.x0 + self.ix as f64 * side,
            root.y0 + self.iy as f64 * side,
            side,
        )
    }

    pub fn children(&self) -> [DyadicSquare; 4] {
        let (l, x, y) = (self.level + 1, self.ix << 1, self.iy << 1);
        [
            DyadicSquare {
                level: l,
                ix: x,
                iy: y,
            },
            DyadicSquare {
                level: l,
                ix: x + 1,
                iy: y,
            },
            DyadicSquare {
                level: l,
                ix: x,
                iy: y + 1,
            },
            DyadicSquare {
                level: l,
                ix: x + 1,
                iy: y + 1,
            },
        ]
    }

    fn area_units(&self) -> u128 {
        1u128 << (2 * (MAX_SUPPORTED_LEVEL - self.level))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Major,
    Minor,
}

/// Conservative: a true minor may be labeled major, never the reverse.
pub fn classify(h: &MapExpr, q: &Square, target: f64) -> Result<Class> {
    if target.is_nan() || target <= 0.0 {
        return Err(Error::Domain(format!(
            "target must be positive, got {target}"
        )));
    }
    let bound = h.derivative_bound(q)? * q.diam();
    Ok(if bound <= target {
        Class::Minor
    } else {
        Class::Major
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub root: Square,
    pub target: f64,
    pub start_level: u32,
    /// Sorted by level, then `ix`, then `iy`.
    pub minors: Vec<DyadicSquare>,
    /// `M(ℓ)`: majors split at each level.
    pub major_counts: BTreeMap<u32, u64>,
    pub total_minors: usize,
    pub initial_squares: usize,
    /// Area accounting in units of `4^{-60}` root areas.
    pub root_area: u128,
    pub emitted_area: u128,
    pub discarded_area: u128,
    /// Emitted + discarded + pending equalled the root area after every level.
    pub conserved: bool,
}

impl RefineResult {
    pub fn total_majors(&self) -> u64 {
        self.major_counts.values().sum()
    }

    pub fn majors_from(&self, level: u32) -> u64 {
        self.major_counts.range(level..).map(|(_, c)| c).sum()
    }

    /// CSV with columns `level,ix,iy`.
    pub fn minors_csv(&self) -> String {
        let mut out = String::from("level,ix,iy\n");
        for q in &self.minors {
            let _ = writeln!(out, "{},{},{}", q.level, q.ix, q.iy);
        }
        out
    }
}

/// Options for [`refine_with`].
#[derive(Debug, Clone, Copy)]
pub struct RefineOptions<'a> {
    pub max_level: u32,
    /// Level of the initial tiling.
    pub start_level: u32,
    /// Keep only squares containing one of these points (half-open cells).
    pub support: Option<&'a [Point]>,
}

impl Default for RefineOptions<'_> {
    fn default() -> Self {
        Self {
            max_level: DEFAULT_MAX_LEVEL,
            start_level: 0,
            support: None,
        }
    }
}

/// Refines the whole root square.
pub fn refine(h: &MapExpr, root: &Square, target: f64, max_level: u32) -> Result<RefineResult> {
    refine_with(
        h,
        root,
        target,
        &RefineOptions {
            max_level,
            ..Default::default()
        },
    )
}

/// Unit coordinates of support points in `[0,1]²` relative to the root.
struct Occupancy {
    coords: Vec<(f64, f64)>,
}

impl Occupancy {
    fn new(root: &Square, points: &[Point]) -> Self {
        let coords = points
            .iter()
            .filter(|p| root.contains(**p))
            .map(|p| ((p.re - root.x0) / root.side, (p.im - root.y0) / root.side))
            .collect();
        Self { coords }
    }

    /// Occupied cells at `level`; scaling by `2^level` is exact so indices nest across levels.
    fn cells(&self, level: u32) -> HashSet<(u64, u64)> {
        let n = 1u64 << level;
        let scale = (level as f64).exp2();
        let idx = |u: f64| ((u * scale).floor() as u64).min(n - 1);
        self.coords.iter().map(|&(u, v)| (idx(u), idx(v))).collect()
    }
}

pub fn refine_with(
    h: &MapExpr,
    root: &Square,
    target: f64,
    opts: &RefineOptions<'_>,
) -> Result<RefineResult> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!(
            "target must be positive, got {target}"
        )));
    }
    if opts.max_level < 1 || opts.max_level > MAX_SUPPORTED_LEVEL {
        return Err(Error::Domain(format!(
            "max_level must lie in [1, {MAX_SUPPORTED_LEVEL}], got {}",
            opts.max_level
        )));
    }
    if opts.start_level > opts.max_level {
        return Err(Error::Domain("start level exceeds max_level".into()));
    }
    if !(root.side > 0.0 && root.side.is_finite()) {
        return Err(Error::Domain(format!(
            "root side must be positive, got {}",
            root.side
        )));
    }
    let occupancy = opts.support.map(|s| Occupancy::new(root, s));
    let root_area = DyadicSquare {
        level: 0,
        ix: 0,
        iy: 0,
    }
    .area_units();

    let mut pending: Vec<DyadicSquare> = match &occupancy {
        Some(occ) => {
            let mut v: Vec<DyadicSquare> = occ
                .cells(opts.start_level)
                .into_iter()
                .map(|(ix, iy)| DyadicSquare {
                    level: opts.start_level,
                    ix,
                    iy,
                })
                .collect();
            v.sort();
            v
        }
        None => {
            let n = 1u64 << opts.start_level;
            (0..n)
                .flat_map(|iy| {
                    (0..n).map(move |ix| DyadicSquare {
                        level: opts.start_level,
                        ix,
                        iy,
                    })
                })
                .collect()
        }
    };
    let initial_squares = pending.len();
    let pending_area = |v: &[DyadicSquare]| v.iter().map(DyadicSquare::area_units).sum::<u128>();
    let mut discarded_area = root_area - pending_area(&pending);
    let mut emitted_area = 0u128;
    let mut minors = Vec::new();
    let mut major_counts = BTreeMap::new();
    let mut conserved = true;

    let mut level = opts.start_level;
    while !pending.is_empty() {
        let classes = pending
            .par_iter()
            .map(|q| classify(h, &q.geometry(root), target))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut majors = Vec::new();
        for (q, c) in pending.iter().zip(classes) {
            match c {
                Class::Minor => {
                    emitted_area += q.area_units();
                    minors.push(*q);
                }
                Class::Major => majors.push(*q),
            }
        }
        if majors.is_empty() {
            pending.clear();
        } else {
            if level >= opts.max_level {
                return Err(Error::LevelBudget {
                    max_level: opts.max_level,
                    surviving: majors.len(),
                });
            }
            major_counts.insert(level, majors.len() as u64);
            let occupied = occupancy.as_ref().map(|o| o.cells(level + 1));
            let mut next = Vec::with_capacity(4 * majors.len());
            for q in &majors {
                for c in q.children() {
                    match &occupied {
                        Some(cells) if !cells.contains(&(c.ix, c.iy)) => {
                            discarded_area += c.area_units()
                        }
                        _ => next.push(c),
                    }
                }
            }
            pending = next;
            level += 1;
        }
        conserved &= emitted_area + discarded_area + pending_area(&pending) == root_area;
    }
    minors.sort();
    Ok(RefineResult {
        root: *root,
        target,
        start_level: opts.start_level,
        total_minors: minors.len(),
        minors,
        major_counts,
        initial_squares,
        root_area,
        emitted_area,
        discarded_area,
        conserved,
    })
}

/// Refinement at step `j` of a schedule: tiles of side `r_j` covering
/// `D(0,R) ∩ E`, refined to target `r′_j`.
pub fn refine_step(
    h: &MapExpr,
    e: &PointSet,
    schedule: &RefineSchedule,
    j: u32,
    max_level: u32,
) -> Result<RefineResult> {
    let radius = schedule.radius();
    let part: Vec<Point> = e
        .points()
        .iter()
        .copied()
        .filter(|p| p.norm() < radius)
        .collect();
    // root side is 2R, so tiles of side r_j sit one level below j
    refine_with(
        h,
        &schedule.root(),
        schedule.r_prime_j(j),
        &RefineOptions {
            max_level,
            start_level: j + 1,
            support: Some(&part),
        },
    )
}

/// Upper bound for the covering number of `D(w,R′) ∩ h(E)` at scale `r′_j`:
/// the number of minors meeting `D(0,R) ∩ E`.
pub fn image_cover_count(
    h: &MapExpr,
    e: &PointSet,
    w: Point,
    schedule: &RefineSchedule,
    j: u32,
) -> Result<usize> {
    let h0 = h.eval(Point::new(0.0, 0.0), 0.0)?;
    if (w - h0).norm() > schedule.r_prime {
        return Err(Error::Domain(format!(
            "h(0) = ({}, {}) is not within R' of w = ({}, {})",
            h0.re, h0.im, w.re, w.im
        )));
    }
    Ok(refine_step(h, e, schedule, j, DEFAULT_MAX_LEVEL)?.total_minors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub j: u32,
    pub target: f64,
    pub initial_squares: usize,
    pub majors: u64,
    pub minors: usize,
    pub conserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweep {
    pub map: String,
    pub schedule: RefineSchedule,
    pub beta: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log₂ Σ_{ℓ≥j} M(ℓ)` against `j` over rows with majors.
    pub growth_fit: Option<f64>,
}

impl RateSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,target,initial_squares,majors,minors,conserved\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:?},{},{},{},{}",
                r.j, r.target, r.initial_squares, r.majors, r.minors, r.conserved
            );
        }
        out
    }
}

/// Runs [`refine_step`] for `j = j₀, …, j₀ + steps − 1`.
pub fn rate_sweep(
    h: &MapExpr,
    e: &PointSet,
    schedule: &RefineSchedule,
    steps: u32,
    max_level: u32,
) -> Result<RateSweep> {
    let j0 = schedule.j0();
    let mut rows = Vec::with_capacity(steps as usize);
    for j in j0..j0 + steps {
        let r = refine_step(h, e, schedule, j, max_level)?;
        rows.push(RateRow {
            j,
            target: r.target,
            initial_squares: r.initial_squares,
            majors: r.total_majors(),
            minors: r.total_minors,
            conserved: r.conserved,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.majors > 0)
        .map(|r| (r.j as f64, (r.majors as f64).log2()))
        .collect();
    Ok(RateSweep {
        map: h.to_string(),
        schedule: *schedule,
        beta: schedule.beta(),
        growth_fit: least_squares_slope(&pts),
        rows,
    })
}
