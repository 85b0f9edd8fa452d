//! Finite samples of compact planar sets.
//!
//! A [`PointSet`] is an ordered, duplicate-free list of complex numbers together
//! with a sampling resolution `δ`: every point of the intended compact set lies
//! within `δ` of some sample. Downstream scale analysis never probes below a
//! fixed multiple of `δ`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Complex64;

/// Relative tolerance used to decide whether a set is already normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Point>,
    resolution: f64,
    label: String,
}

impl PointSet {
    /// Builds a point set, dropping exact duplicates (first occurrence wins).
    pub fn new(points: Vec<Point>, resolution: f64, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(p) = points
            .iter()
            .find(|p| !p.re.is_finite() || !p.im.is_finite())
        {
            return Err(Error::Domain(format!(
                "non-finite coordinate ({}, {})",
                p.re, p.im
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Domain(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let points = dedup_exact(points);
        if points.len() > 1 {
            let diam = diameter(&points);
            if resolution > diam {
                return Err(Error::Domain(format!(
                    "resolution {resolution} exceeds set diameter {diam}"
                )));
            }
        }
        Ok(Self {
            points,
            resolution,
            label: label.into(),
        })
    }

    /// Like [`PointSet::new`] but clamps `resolution` into `(0, diameter]`.
    pub fn with_clamped_resolution(
        points: Vec<Point>,
        resolution: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let points = dedup_exact(points);
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let diam = diameter(&points);
        let mut res = resolution;
        if points.len() > 1 && (!res.is_finite() || res > diam || res <= 0.0) {
            res = if res > 0.0 && res.is_finite() {
                diam
            } else {
                min_nn_gap(&points)
            };
        }
        if points.len() == 1 && !(res.is_finite() && res > 0.0) {
            res = 1.0;
        }
        Self::new(points, res, label)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    /// Center of the axis-parallel bounding box.
    pub fn bbox_center(&self) -> Point {
        let (lo, hi) = bbox(&self.points);
        Point::new(0.5 * (lo.re + hi.re), 0.5 * (lo.im + hi.im))
    }

    /// True if the set is centered at the origin with diameter 1/2 (or is a single point).
    pub fn is_normalized(&self) -> bool {
        if self.points.len() == 1 {
            return true;
        }
        let c = self.bbox_center();
        let d = self.diameter();
        c.norm() <= NORMALIZED_TOL && (d - 0.5).abs() <= NORMALIZED_TOL
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            let c = self.bbox_center();
            Err(Error::NotNormalized {
                center_x: c.re,
                center_y: c.im,
                diameter: self.diameter(),
            })
        }
    }

    /// Translate and scale so the bounding box is centered at the origin and
    /// the diameter is exactly 1/2.
    pub fn normalize(&self) -> (PointSet, Similarity) {
        if self.is_normalized() {
            return (self.clone(), Similarity::identity());
        }
        let shift = self.bbox_center();
        let scale = 0.5 / self.diameter();
        let sim = Similarity { scale, shift };
        let points: Vec<Point> = self.points.iter().map(|&p| sim.apply(p)).collect();
        let points = dedup_exact(points);
        let resolution = (self.resolution * scale).min(if points.len() > 1 {
            diameter(&points)
        } else {
            f64::INFINITY
        });
        let set = PointSet {
            points,
            resolution,
            label: self.label.clone(),
        };
        (set, sim)
    }

    /// Writes the set in the line-oriented `x,y` format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 44 + 64);
        let _ = writeln!(out, "# resolution={:?}", self.resolution);
        if !self.label.is_empty() {
            let _ = writeln!(out, "# label={}", self.label.replace('\n', " "));
        }
        for p in &self.points {
            let _ = writeln!(out, "{:?},{:?}", p.re, p.im);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut points = Vec::new();
        let mut resolution = None;
        let mut label = String::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("resolution=") {
                    let r: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| perr(lineno, format!("bad resolution {v:?}")))?;
                    if !(r.is_finite() && r > 0.0) {
                        return Err(perr(
                            lineno,
                            format!("resolution must be positive, got {v}"),
                        ));
                    }
                    resolution = Some(r);
                } else if let Some(v) = comment.strip_prefix("label=") {
                    label = v.to_string();
                }
                continue;
            }
            let (xs, ys) = line
                .split_once(',')
                .ok_or_else(|| perr(lineno, format!("expected \"x,y\", got {line:?}")))?;
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| perr(lineno, format!("bad number {:?}", s.trim())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(
                        lineno,
                        format!("non-finite coordinate {:?}", s.trim()),
                    ))
                }
            };
            points.push(Point::new(parse(xs)?, parse(ys)?));
        }
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        match resolution {
            Some(r) => PointSet::new(points, r, label),
            None => {
                let points = dedup_exact(points);
                let r = if points.len() > 1 {
                    min_nn_gap(&points)
                } else {
                    1.0
                };
                PointSet::new(points, r, label)
            }
        }
    }
}

/// `p ↦ scale·(p − shift)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub shift: Point,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            shift: Point::new(0.0, 0.0),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.shift == Point::new(0.0, 0.0)
    }

    pub fn apply(&self, p: Point) -> Point {
        (p - self.shift) * self.scale
    }

    pub fn invert(&self, q: Point) -> Point {
        q / self.scale + self.shift
    }
}

/// Families of sets that [`generate`] knows how to sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    /// `{n^-p : n ≥ 1} ∪ {0}`.
    SequencePower {
        p: f64,
    },
    /// `{q^n : n ≥ 1}`.
    Geometric {
        q: f64,
    },
    /// Two-sided Cantor construction on `[0,1]`, keeping `ratio` at each end.
    Cantor {
        ratio: f64,
        depth: u32,
    },
    /// `n × n` lattice `{(i/n, j/n)}`.
    Grid {
        n: u32,
    },
    /// Polynomial spiral `t^-p e^{it}`, `t = 1, 1+step, … ≤ t_max`, plus 0.
    Spiral {
        p: f64,
        t_max: f64,
        step: f64,
    },
    Explicit {
        path: String,
    },
}

impl SetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match *self {
            SetSpec::SequencePower { p } if !(p > 0.0 && p.is_finite()) => {
                bad(format!("sequence_power needs p > 0, got {p}"))
            }
            SetSpec::Geometric { q } if !(q > 0.0 && q < 1.0) => {
                bad(format!("geometric needs 0 < q < 1, got {q}"))
            }
            SetSpec::Cantor { ratio, depth } if !(ratio > 0.0 && ratio < 0.5) || depth < 1 => bad(
                format!("cantor needs 0 < ratio < 1/2 and depth >= 1, got ({ratio}, {depth})"),
            ),
            SetSpec::Grid { n } if n < 1 => bad("grid needs n >= 1".into()),
            SetSpec::Spiral { p, t_max, step }
                if !(p > 0.0 && t_max > 1.0 && step > 0.0 && t_max.is_finite()) =>
            {
                bad(format!(
                    "spiral needs p > 0, t_max > 1, step > 0, got ({p}, {t_max}, {step})"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Parses the command-line mini-grammar: `seq:<p>`, `geom:<q>`,
    /// `cantor:<ratio>:<depth>`, `grid:<n>`, `spiral:<p>:<tmax>:<step>`, `file:<path>`.
    pub fn parse(s: &str) -> Result<Self> {
        let err = || Error::Domain(format!("bad set spec {s:?}"));
        let (head, rest) = s.split_once(':').ok_or_else(err)?;
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = rest
                .split(':')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err())?;
            if v.len() == n {
                Ok(v)
            } else {
                Err(err())
            }
        };
        let spec = match head {
            "seq" => SetSpec::SequencePower { p: nums(1)?[0] },
            "geom" => SetSpec::Geometric { q: nums(1)?[0] },
            "cantor" => {
                let v = nums(2)?;
                if v[1].fract() != 0.0 || v[1] < 0.0 {
                    return Err(err());
                }
                SetSpec::Cantor {
                    ratio: v[0],
                    depth: v[1] as u32,
                }
            }
            "grid" => {
                let v = nums(1)?;
                if v[0].fract() != 0.0 || v[0] < 0.0 {
                    return Err(err());
                }
                SetSpec::Grid { n: v[0] as u32 }
            }
            "spiral" => {
                let v = nums(3)?;
                SetSpec::Spiral {
                    p: v[0],
                    t_max: v[1],
                    step: v[2],
                }
            }
            "file" => SetSpec::Explicit {
                path: rest.to_string(),
            },
            _ => return Err(err()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match self {
            SetSpec::SequencePower { p } => format!("seq:{p}"),
            SetSpec::Geometric { q } => format!("geom:{q}"),
            SetSpec::Cantor { ratio, depth } => format!("cantor:{ratio}:{depth}"),
            SetSpec::Grid { n } => format!("grid:{n}"),
            SetSpec::Spiral { p, t_max, step } => format!("spiral:{p}:{t_max}:{step}"),
            SetSpec::Explicit { path } => format!("file:{path}"),
        }
    }
}

/// Samples the first `count` points of a family.
///
/// For sequences the limit point 0 is appended after the `count` terms and
/// `δ` is the smallest gap between consecutive generated points. For grids and
/// Cantor sets `δ` is the cell size.
pub fn generate(spec: &SetSpec, count: usize) -> Result<PointSet> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Domain("count must be >= 1".into()));
    }
    let label = format!("{}#{count}", spec.label());
    match *spec {
        SetSpec::SequencePower { p } => {
            let mut pts: Vec<Point> = (1..=count)
                .map(|n| Point::new(1.0 / pow_real(n as f64, p), 0.0))
                .collect();
            pts.push(Point::new(0.0, 0.0));
            let delta = min_consecutive_gap(&pts);
            PointSet::new(pts, delta, label)
        }
        SetSpec::Geometric { q } => {
            let pts: Vec<Point> = (1..=count)
                .map(|n| Point::new(q.powi(n as i32), 0.0))
                .collect();
            let delta = if pts.len() > 1 {
                min_consecutive_gap(&pts)
            } else {
                1.0
            };
            PointSet::new(pts, delta, label)
        }
        SetSpec::Cantor { ratio, depth } => {
            let mut intervals = vec![(0.0f64, 1.0f64)];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(intervals.len() * 2);
                for &(a, b) in &intervals {
                    let len = (b - a) * ratio;
                    next.push((a, a + len));
                    next.push((b - len, b));
                }
                intervals = next;
            }
            let pts: Vec<Point> = intervals
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .take(count)
                .map(|x| Point::new(x, 0.0))
                .collect();
            let delta = ratio.powi(depth as i32);
            PointSet::with_clamped_resolution(pts, delta, label)
        }
        SetSpec::Grid { n } => {
            let inv = 1.0 / n as f64;
            let pts: Vec<Point> = (0..n)
                .flat_map(|j| (0..n).map(move |i| Point::new(i as f64 * inv, j as f64 * inv)))
                .take(count)
                .collect();
            PointSet::with_clamped_resolution(pts, inv, label)
        }
        SetSpec::Spiral { p, t_max, step } => {
            let mut pts = Vec::new();
            let mut k = 0usize;
            loop {
                let t = 1.0 + k as f64 * step;
                if t > t_max || pts.len() >= count {
                    break;
                }
                pts.push(Point::from_polar(pow_real(t, -p), t));
                k += 1;
            }
            pts.push(Point::new(0.0, 0.0));
            let delta = min_consecutive_gap(&pts);
            PointSet::with_clamped_resolution(pts, delta, label)
        }
        SetSpec::Explicit { ref path } => {
            let set = PointSet::load(path)?;
            let pts: Vec<Point> = set.points.iter().copied().take(count).collect();
            PointSet::with_clamped_resolution(pts, set.resolution, set.label)
        }
    }
}

fn pow_real(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

fn dedup_exact(points: Vec<Point>) -> Vec<Point> {
    // adding 0.0 maps -0.0 to +0.0 so equal values share a key
    let key = |v: f64| (v + 0.0).to_bits();
    let mut seen = HashSet::with_capacity(points.len());
    points
        .into_iter()
        .filter(|p| seen.insert((key(p.re), key(p.im))))
        .collect()
}

fn min_consecutive_gap(points: &[Point]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest nearest-neighbour distance; `O(n log n)` via an R-tree.
pub(crate) fn min_nn_gap(points: &[Point]) -> f64 {
    use rstar::RTree;
    let tree = RTree::bulk_load(points.iter().map(|p| [p.re, p.im]).collect::<Vec<_>>());
    points
        .iter()
        .filter_map(|p| {
            tree.nearest_neighbor_iter(&[p.re, p.im])
                .nth(1)
                .map(|q| (Point::new(q[0], q[1]) - p).norm())
        })
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn bbox(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

/// Exact diameter: maximum pairwise distance over convex-hull vertices.
pub fn diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::new(x, 0.0)).collect()
    }

    #[test]
    fn sequence_power_one() {
        let e = generate(&SetSpec::SequencePower { p: 1.0 }, 4).unwrap();
        assert_eq!(
            e.points(),
            real(&[1.0, 0.5, 1.0 / 3.0, 0.25, 0.0]).as_slice()
        );
        assert_eq!(e.resolution(), 1.0 / 3.0 - 0.25);
    }

    #[test]
    fn sequence_power_two() {
        let e = generate(&SetSpec::SequencePower { p: 2.0 }, 3).unwrap();
        assert_eq!(e.points(), real(&[1.0, 0.25, 1.0 / 9.0, 0.0]).as_slice());
    }

    #[test]
    fn degenerate_grid() {
        let e = generate(&SetSpec::Grid { n: 1 }, 1).unwrap();
        assert_eq!(e.points(), &[Point::new(0.0, 0.0)]);
        assert_eq!(e.resolution(), 1.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&SetSpec::SequencePower { p: 0.0 }, 3).is_err());
        assert!(generate(&SetSpec::Geometric { q: 1.0 }, 3).is_err());
        assert!(generate(
            &SetSpec::Cantor {
                ratio: 0.5,
                depth: 3
            },
            3
        )
        .is_err());
        assert!(generate(
            &SetSpec::Cantor {
                ratio: 0.3,
                depth: 0
            },
            3
        )
        .is_err());
        assert!(generate(&SetSpec::Grid { n: 0 }, 3).is_err());
        assert!(generate(&SetSpec::Grid { n: 3 }, 0).is_err());
    }

    #[test]
    fn sequence_gaps_decrease_and_delta_is_last_gap() {
        for p in [0.5, 1.0, 2.0, 3.0] {
            let e = generate(&SetSpec::SequencePower { p }, 200).unwrap();
            let terms = &e.points()[..200];
            let gaps: Vec<f64> = terms.windows(2).map(|w| w[0].re - w[1].re).collect();
            assert!(gaps.windows(2).all(|g| g[1] < g[0]), "p={p}");
            assert_eq!(e.resolution(), *gaps.last().unwrap());
        }
    }

    #[test]
    fn normalize_three_points() {
        let e = PointSet::new(real(&[0.0, 10.0, 20.0]), 10.0, "").unwrap();
        let (n, sim) = e.normalize();
        assert_eq!(n.points(), real(&[-0.25, 0.0, 0.25]).as_slice());
        assert_eq!(sim.scale, 1.0 / 40.0);
        assert_eq!(sim.shift, Point::new(10.0, 0.0));
        assert_eq!(n.resolution(), 0.25);
    }

    #[test]
    fn normalize_sequence_has_half_diameter() {
        let e = generate(&SetSpec::SequencePower { p: 1.0 }, 1000).unwrap();
        let (n, sim) = e.normalize();
        assert_eq!(sim.scale, 0.5);
        assert_eq!(n.diameter(), 0.5);
        assert!(n.is_normalized());
    }

    #[test]
    fn normalize_is_idempotent() {
        for spec in [
            SetSpec::SequencePower { p: 1.5 },
            SetSpec::Grid { n: 7 },
            SetSpec::Spiral {
                p: 0.5,
                t_max: 40.0,
                step: 0.3,
            },
            SetSpec::Cantor {
                ratio: 0.3,
                depth: 5,
            },
        ] {
            let e = generate(&spec, 500).unwrap();
            let (n, _) = e.normalize();
            let (n2, sim2) = n.normalize();
            assert!(sim2.is_identity(), "{spec:?}");
            assert_eq!(n, n2);
        }
    }

    #[test]
    fn single_point_normalizes_to_identity() {
        let e = PointSet::new(vec![Point::new(3.0, 4.0)], 1.0, "").unwrap();
        let (n, sim) = e.normalize();
        assert!(sim.is_identity());
        assert_eq!(n, e);
    }

    #[test]
    fn duplicates_removed_in_order() {
        let e = PointSet::new(real(&[1.0, 2.0, 1.0, 3.0]), 0.5, "").unwrap();
        assert_eq!(e.points(), real(&[1.0, 2.0, 3.0]).as_slice());
    }

    #[test]
    fn signed_zeros_are_duplicates() {
        let s = PointSet::with_clamped_resolution(
            vec![Point::new(0.0, -0.0), Point::new(-0.0, 0.0)],
            f64::INFINITY,
            "",
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.resolution(), 1.0);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let e = generate(
            &SetSpec::Spiral {
                p: 0.7,
                t_max: 30.0,
                step: 0.1,
            },
            1000,
        )
        .unwrap();
        let back = PointSet::from_text(&e.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn nan_line_is_parse_error() {
        let err = PointSet::from_text("# resolution=1\n0,0\nnan,0\n", Path::new("f")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_errors() {
        let err = PointSet::from_text("# resolution=1\n", Path::new("f")).unwrap_err();
        assert_eq!(err.to_string(), "empty point set");
    }

    #[test]
    fn diameter_matches_brute_force() {
        let e = generate(
            &SetSpec::Spiral {
                p: 0.4,
                t_max: 25.0,
                step: 0.7,
            },
            100,
        )
        .unwrap();
        let pts = e.points();
        let mut brute = 0.0f64;
        for a in pts {
            for b in pts {
                brute = brute.max((a - b).norm());
            }
        }
        assert_eq!(e.diameter(), brute);
    }

    #[test]
    fn set_spec_grammar() {
        assert_eq!(
            SetSpec::parse("seq:1").unwrap(),
            SetSpec::SequencePower { p: 1.0 }
        );
        assert_eq!(
            SetSpec::parse("cantor:0.3333:8").unwrap(),
            SetSpec::Cantor {
                ratio: 0.3333,
                depth: 8
            }
        );
        assert!(SetSpec::parse("grid:2.5").is_err());
        assert!(SetSpec::parse("bogus:1").is_err());
    }
}
