//! Explicit planar maps: holomorphic primitives, radial stretches, and their
//! compositions, with finite-difference dilatation certificates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::{Point, PointSet};

/// Default singularity exclusion, relative to the set diameter.
pub const DEFAULT_EXCLUSION: f64 = 1e-9;

/// Attached to every mapped set: the image resolution is a heuristic.
pub const IMAGE_RESOLUTION_NOTE: &str =
    "image resolution is the minimum gap between images of consecutive samples (heuristic, not a certified bound)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Power {
        d: u32,
    },
    /// Real coefficients, constant term first.
    Poly {
        coeffs: Vec<f64>,
    },
    Reciprocal,
    /// `z ↦ −Log z`, principal branch; the non-positive reals are singular.
    NegLog,
    /// `z ↦ z·|z|^{1/K−1}`, `0 ↦ 0`.
    Stretch {
        k: f64,
    },
    Affine {
        a: Point,
        b: Point,
    },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Power { .. } => "pow",
            Primitive::Poly { .. } => "poly",
            Primitive::Reciprocal => "recip",
            Primitive::NegLog => "neglog",
            Primitive::Stretch { .. } => "stretch",
            Primitive::Affine { .. } => "affine",
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        !matches!(self, Primitive::Stretch { .. })
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MapSyntax(m));
        match self {
            Primitive::Power { d } if *d < 1 => bad(format!("pow degree must be >= 1, got {d}")),
            Primitive::Poly { coeffs } if coeffs.is_empty() => {
                bad("poly needs at least one coefficient".into())
            }
            Primitive::Poly { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                bad("poly coefficients must be finite".into())
            }
            Primitive::Stretch { k } if !(k.is_finite() && *k >= 1.0) => {
                bad(format!("stretch K must be >= 1, got {k}"))
            }
            Primitive::Affine { a, b } => {
                if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
                    bad("affine coefficients must be finite".into())
                } else if *a == Point::new(0.0, 0.0) {
                    bad("affine slope must be nonzero".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn degree(&self) -> u32 {
        match self {
            Primitive::Power { d } => *d,
            Primitive::Poly { coeffs } => {
                coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0) as u32
            }
            _ => 1,
        }
    }

    fn near_singularity(&self, z: Point, eps: f64) -> bool {
        match self {
            Primitive::Reciprocal => z.norm() <= eps,
            Primitive::NegLog => z.norm() <= eps || (z.re <= 0.0 && z.im.abs() <= eps),
            _ => false,
        }
    }

    pub fn eval(&self, z: Point) -> Point {
        match self {
            Primitive::Power { d } => z.powu(*d),
            Primitive::Poly { coeffs } => coeffs
                .iter()
                .rev()
                .fold(Point::new(0.0, 0.0), |acc, c| acc * z + c),
            Primitive::Reciprocal => z.inv(),
            Primitive::NegLog => -z.ln(),
            Primitive::Stretch { k } => {
                let r = z.norm();
                if r == 0.0 {
                    z
                } else {
                    z * r.powf(1.0 / k - 1.0)
                }
            }
            Primitive::Affine { a, b } => a * z + b,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Power { d } => write!(f, "pow({d})"),
            Primitive::Poly { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| format!("{c:?}")).collect();
                write!(f, "poly({})", parts.join(","))
            }
            Primitive::Reciprocal => f.write_str("recip"),
            Primitive::NegLog => f.write_str("neglog"),
            Primitive::Stretch { k } => write!(f, "stretch({k:?})"),
            Primitive::Affine { a, b } => {
                write!(f, "affine({:?},{:?},{:?},{:?})", a.re, a.im, b.re, b.im)
            }
        }
    }
}

/// Composition of primitives, applied left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapExpr {
    primitives: Vec<Primitive>,
}

impl MapExpr {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::MapSyntax("empty composition".into()));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self { primitives })
    }

    pub fn single(p: Primitive) -> Result<Self> {
        Self::new(vec![p])
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &MapExpr) -> MapExpr {
        let mut primitives = self.primitives.clone();
        primitives.extend(next.primitives.iter().cloned());
        MapExpr { primitives }
    }

    /// Product of the stretch constants; 1 without stretches.
    pub fn declared_k(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| match p {
                Primitive::Stretch { k } => *k,
                _ => 1.0,
            })
            .product()
    }

    pub fn has_stretch(&self) -> bool {
        self.primitives
            .iter()
            .any(|p| matches!(p, Primitive::Stretch { .. }))
    }

    pub fn is_holomorphic(&self) -> bool {
        self.primitives.iter().all(Primitive::is_holomorphic)
    }

    pub fn has_singularities(&self) -> bool {
        self.primitives
            .iter()
            .any(|p| matches!(p, Primitive::Reciprocal | Primitive::NegLog))
    }

    pub fn holomorphic_part_degree(&self) -> u32 {
        self.primitives
            .iter()
            .filter(|p| p.is_holomorphic())
            .map(Primitive::degree)
            .max()
            .unwrap_or(1)
    }

    /// Evaluates at one point; `eps` is the singularity exclusion at every stage.
    pub fn eval(&self, z: Point, eps: f64) -> Result<Point> {
        let mut w = z;
        for p in &self.primitives {
            if p.near_singularity(w, eps) {
                return Err(Error::Singularity {
                    primitive: p.to_string(),
                    x: w.re,
                    y: w.im,
                    eps,
                });
            }
            w = p.eval(w);
        }
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(Error::Domain(format!(
                "{self} overflows at ({}, {})",
                z.re, z.im
            )));
        }
        Ok(w)
    }

    /// Image of `set`. `exclusion` defaults to `DEFAULT_EXCLUSION · diam(set)`.
    pub fn apply(&self, set: &PointSet, exclusion: Option<f64>) -> Result<MappedSet> {
        let eps = exclusion.unwrap_or_else(|| DEFAULT_EXCLUSION * set.diameter());
        let images: Vec<Result<Point>> = set
            .points()
            .par_iter()
            .map(|&z| self.eval(z, eps))
            .collect();
        let images = images.into_iter().collect::<Result<Vec<_>>>()?;
        let gap = images
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        let label = if set.label().is_empty() {
            self.to_string()
        } else {
            format!("{}|{}", set.label(), self)
        };
        let set = PointSet::with_clamped_resolution(images, gap, label)?;
        Ok(MappedSet {
            set,
            resolution_note: IMAGE_RESOLUTION_NOTE,
        })
    }

    /// Upper bound for `sup_Q |h′|`; holomorphic expressions only.
    ///
    /// The first stage uses the corners of `Q`; later stages bound the image
    /// of the previous stage by a disc whose radius is the Lipschitz bound so
    /// far times the circumradius of `Q`.
    pub fn derivative_bound(&self, q: &Square) -> Result<f64> {
        if let Some(p) = self.primitives.iter().find(|p| !p.is_holomorphic()) {
            return Err(Error::Domain(format!(
                "derivative_bound requires a holomorphic map; found {p}"
            )));
        }
        let mut region = Region::Square(*q);
        let mut lip = 1.0;
        for p in &self.primitives {
            let (lo, hi) = region.modulus_range();
            let l = match p {
                Primitive::Power { d } => *d as f64 * hi.powi(*d as i32 - 1),
                Primitive::Poly { coeffs } => coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| c.abs() * k as f64 * hi.powi(k as i32 - 1))
                    .sum(),
                Primitive::Affine { a, .. } => a.norm(),
                Primitive::Reciprocal => {
                    if lo <= 0.0 {
                        return Err(Error::Domain(format!("{p}: region contains the pole")));
                    }
                    1.0 / (lo * lo)
                }
                Primitive::NegLog => {
                    if lo <= 0.0 || region.meets_slit() {
                        return Err(Error::Domain(format!("{p}: region meets the branch cut")));
                    }
                    1.0 / lo
                }
                Primitive::Stretch { .. } => unreachable!(),
            };
            let (c, r) = region.disc();
            region = Region::Disc(p.eval(c), l * r);
            lip *= l;
        }
        Ok(lip)
    }

    /// Finite-difference dilatation over a `grid_n × grid_n` lattice of cell centers of `region`.
    pub fn estimate_dilatation(
        &self,
        region: &Square,
        grid_n: usize,
        step: f64,
    ) -> Result<DilatationReport> {
        if grid_n < 8 {
            return Err(Error::Domain(format!("grid_n must be >= 8, got {grid_n}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {step}")));
        }
        let h = grid_n as f64;
        let probes: Vec<Point> = (0..grid_n * grid_n)
            .map(|i| {
                let (ix, iy) = ((i % grid_n) as f64, (i / grid_n) as f64);
                Point::new(
                    region.x0 + (ix + 0.5) * region.side / h,
                    region.y0 + (iy + 0.5) * region.side / h,
                )
            })
            .collect();
        let results: Vec<Result<(f64, f64)>> = probes
            .par_iter()
            .map(|&z| {
                let f = |w: Point| self.eval(w, 0.0);
                let dx = Point::new(step, 0.0);
                let dy = Point::new(0.0, step);
                let fx = (f(z + dx)? - f(z - dx)?) / (2.0 * step);
                let fy = (f(z + dy)? - f(z - dy)?) / (2.0 * step);
                let i = Point::new(0.0, 1.0);
                let fz = ((fx - i * fy) * 0.5).norm();
                let fzb = ((fx + i * fy) * 0.5).norm();
                if fz <= fzb {
                    return Err(Error::DegenerateDifferential { x: z.re, y: z.im });
                }
                Ok(((fz + fzb) / (fz - fzb), fzb / fz))
            })
            .collect();
        let mut k_hat = 1.0f64;
        let mut mu = 0.0f64;
        for r in results {
            let (k, m) = r?;
            k_hat = k_hat.max(k);
            mu = mu.max(m);
        }
        Ok(DilatationReport {
            k_hat,
            max_beltrami: mu,
            region: *region,
            grid_n,
            step,
        })
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.primitives.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for MapExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let prims = s
            .split('|')
            .map(parse_primitive)
            .collect::<Result<Vec<_>>>()?;
        MapExpr::new(prims)
    }
}

fn parse_primitive(tok: &str) -> Result<Primitive> {
    let tok = tok.trim();
    let syn = |m: String| Error::MapSyntax(m);
    let (name, args) = match tok.find('(') {
        Some(i) => {
            let inner = tok[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| syn(format!("missing ')' in {tok:?}")))?;
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| syn(format!("bad number {:?} in {tok:?}", a.trim())))
                })
                .collect::<Result<Vec<f64>>>()?;
            (tok[..i].trim(), args)
        }
        None => (tok, Vec::new()),
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(syn(format!(
                "{name} takes {n} argument(s), got {}",
                args.len()
            )))
        }
    };
    let p = match name {
        "pow" => {
            arity(1)?;
            let d = args[0];
            if d.fract() != 0.0 || d < 1.0 || d > u32::MAX as f64 {
                return Err(syn(format!(
                    "pow degree must be a positive integer, got {d}"
                )));
            }
            Primitive::Power { d: d as u32 }
        }
        "poly" => Primitive::Poly { coeffs: args },
        "recip" => {
            arity(0)?;
            Primitive::Reciprocal
        }
        "neglog" => {
            arity(0)?;
            Primitive::NegLog
        }
        "stretch" => {
            arity(1)?;
            Primitive::Stretch { k: args[0] }
        }
        "affine" => {
            arity(4)?;
            Primitive::Affine {
                a: Point::new(args[0], args[1]),
                b: Point::new(args[2], args[3]),
            }
        }
        "" => return Err(syn("empty primitive".into())),
        other => return Err(syn(format!("unknown primitive {other:?}"))),
    };
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct MappedSet {
    pub set: PointSet,
    pub resolution_note: &'static str,
}

/// Closed axes-parallel square `[x0, x0+side] × [y0, y0+side]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub x0: f64,
    pub y0: f64,
    pub side: f64,
}

impl Square {
    pub fn new(x0: f64, y0: f64, side: f64) -> Self {
        Self { x0, y0, side }
    }

    pub fn corners(&self) -> [Point; 4] {
        let (a, b, s) = (self.x0, self.y0, self.side);
        [
            Point::new(a, b),
            Point::new(a + s, b),
            Point::new(a, b + s),
            Point::new(a + s, b + s),
        ]
    }

    pub fn center(&self) -> Point {
        Point::new(self.x0 + self.side / 2.0, self.y0 + self.side / 2.0)
    }

    pub fn diam(&self) -> f64 {
        self.side * std::f64::consts::SQRT_2
    }

    pub fn contains(&self, p: Point) -> bool {
        p.re >= self.x0
            && p.re <= self.x0 + self.side
            && p.im >= self.y0
            && p.im <= self.y0 + self.side
    }

    /// Euclidean distance from `p` to the square (0 inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.x0 - p.re).max(p.re - self.x0 - self.side).max(0.0);
        let dy = (self.y0 - p.im).max(p.im - self.y0 - self.side).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy)]
enum Region {
    Square(Square),
    Disc(Point, f64),
}

impl Region {
    fn modulus_range(&self) -> (f64, f64) {
        match *self {
            Region::Square(q) => {
                let hi = q.corners().iter().map(|c| c.norm()).fold(0.0, f64::max);
                (q.distance_to(Point::new(0.0, 0.0)), hi)
            }
            Region::Disc(c, r) => ((c.norm() - r).max(0.0), c.norm() + r),
        }
    }

    fn disc(&self) -> (Point, f64) {
        match *self {
            Region::Square(q) => (q.center(), q.diam() / 2.0),
            Region::Disc(c, r) => (c, r),
        }
    }

    fn meets_slit(&self) -> bool {
        match *self {
            Region::Square(q) => q.x0 <= 0.0 && q.y0 <= 0.0 && q.y0 + q.side >= 0.0,
            Region::Disc(c, r) => {
                let d = if c.re <= 0.0 { c.im.abs() } else { c.norm() };
                d <= r
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilatationReport {
    pub k_hat: f64,
    /// Largest `|f_z̄ / f_z|` over the probes.
    pub max_beltrami: f64,
    pub region: Square,
    pub grid_n: usize,
    pub step: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set(pts: &[f64]) -> PointSet {
        PointSet::with_clamped_resolution(
            pts.iter().map(|&x| Point::new(x, 0.0)).collect(),
            0.01,
            "t",
        )
        .unwrap()
    }

    fn expr(s: &str) -> MapExpr {
        s.parse().unwrap()
    }

    #[test]
    fn power_squares_reciprocals() {
        let out = expr("pow(2)")
            .apply(&set(&[1.0, 0.5, 1.0 / 3.0]), None)
            .unwrap()
            .set;
        let want = [1.0, 0.25, 1.0 / 9.0];
        for (p, w) in out.points().iter().zip(want) {
            assert_relative_eq!(p.re, w, max_relative = 1e-15);
            assert_eq!(p.im, 0.0);
        }
    }

    #[test]
    fn neglog_onto_integers() {
        let src: Vec<f64> = (1..=3).map(|n| (-(n as f64)).exp()).collect();
        let out = expr("neglog").apply(&set(&src), None).unwrap().set;
        for (p, n) in out.points().iter().zip(1..=3) {
            assert_relative_eq!(p.re, n as f64, max_relative = 1e-14);
            assert_eq!(p.im, 0.0);
        }
    }

    #[test]
    fn stretch_examples() {
        let e = set(&[0.3, -0.7, 0.0, 2.0]);
        let out = expr("stretch(1)").apply(&e, None).unwrap().set;
        assert_eq!(out.points(), e.points());
        let four = PointSet::new(vec![Point::new(4.0, 0.0)], 1.0, "").unwrap();
        let out = expr("stretch(2)").apply(&four, None).unwrap().set;
        assert_eq!(out.points(), &[Point::new(2.0, 0.0)]);
    }

    #[test]
    fn singularities_are_reported() {
        let e = set(&[1.0, 0.5, 0.0]);
        match expr("recip").apply(&e, None) {
            Err(Error::Singularity { primitive, x, .. }) => {
                assert_eq!(primitive, "recip");
                assert_eq!(x, 0.0);
            }
            other => panic!("{other:?}"),
        }
        let slit = set(&[1.0, -0.5]);
        assert!(matches!(
            expr("neglog").apply(&slit, None),
            Err(Error::Singularity { .. })
        ));
        // a pole at a later stage is caught too
        let e = set(&[1.0, 2.0]);
        assert!(matches!(
            expr("affine(1,0,-1,0)|recip").apply(&e, None),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn grammar_errors() {
        for bad in [
            "",
            "pow(0)",
            "pow(1.5)",
            "stretch(0.5)",
            "affine(0,0,1,1)",
            "foo",
            "pow(2",
            "poly()",
            "recip(1)",
            "pow(2)||recip",
        ] {
            assert!(
                matches!(bad.parse::<MapExpr>(), Err(Error::MapSyntax(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn declared_k_and_degree() {
        assert_eq!(expr("pow(3)").declared_k(), 1.0);
        assert_eq!(expr("stretch(2)|pow(2)|stretch(1.5)").declared_k(), 3.0);
        assert_eq!(
            expr("stretch(2)|pow(3)|poly(0,1,1)").holomorphic_part_degree(),
            3
        );
        assert!(!expr("stretch(2)").is_holomorphic());
    }

    #[test]
    fn derivative_bound_examples() {
        let unit = Square::new(0.0, 0.0, 1.0);
        assert_eq!(
            expr("pow(1)")
                .derivative_bound(&Square::new(-3.0, 5.0, 0.1))
                .unwrap(),
            1.0
        );
        assert_relative_eq!(
            expr("pow(2)").derivative_bound(&unit).unwrap(),
            2.0 * 2f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            expr("pow(3)")
                .derivative_bound(&Square::new(1.0, 0.0, 1.0))
                .unwrap(),
            15.0,
            max_relative = 1e-14
        );
        // poly(0,1,1) = z + z²: 1 + 2·√2 on the unit square
        assert_relative_eq!(
            expr("poly(0,1,1)").derivative_bound(&unit).unwrap(),
            1.0 + 2.0 * 2f64.sqrt(),
            max_relative = 1e-15
        );
        assert!(matches!(
            expr("stretch(2)").derivative_bound(&unit),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            expr("recip").derivative_bound(&unit),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dilatation_examples() {
        let r = expr("affine(2,0,0,0)")
            .estimate_dilatation(&Square::new(-1.0, -1.0, 2.0), 16, 1e-4)
            .unwrap();
        assert!((r.k_hat - 1.0).abs() <= 1e-6, "{r:?}");
        let r = expr("pow(2)")
            .estimate_dilatation(&Square::new(1.0, 1.0, 1.0), 16, 1e-5)
            .unwrap();
        assert!((r.k_hat - 1.0).abs() <= 1e-4, "{r:?}");
        let annulus_piece = Square::new(0.6, 0.3, 0.6);
        let r = expr("stretch(2)")
            .estimate_dilatation(&annulus_piece, 16, 1e-5)
            .unwrap();
        assert!((r.k_hat - 2.0).abs() <= 1e-2, "{r:?}");
        assert!((r.max_beltrami - 1.0 / 3.0).abs() <= 1e-3, "{r:?}");
        assert!(matches!(
            expr("affine(-1,0,0,0)|stretch(1)").estimate_dilatation(&annulus_piece, 7, 1e-5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_map_is_degenerate() {
        let r = expr("poly(1)").estimate_dilatation(&Square::new(0.5, 0.5, 1.0), 8, 1e-6);
        assert!(
            matches!(r, Err(Error::DegenerateDifferential { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn image_resolution_uses_consecutive_gaps() {
        let e = set(&[1.0, 0.5, 0.25]);
        let out = expr("pow(2)").apply(&e, None).unwrap();
        assert_eq!(out.set.resolution(), 0.25 - 0.0625);
        assert_eq!(out.resolution_note, IMAGE_RESOLUTION_NOTE);
    }

    fn arb_prim() -> impl Strategy<Value = Primitive> {
        prop_oneof![
            (1u32..6).prop_map(|d| Primitive::Power { d }),
            prop::collection::vec(-3.0f64..3.0, 1..5).prop_map(|coeffs| Primitive::Poly { coeffs }),
            Just(Primitive::Reciprocal),
            Just(Primitive::NegLog),
            (1.0f64..8.0).prop_map(|k| Primitive::Stretch { k }),
            (0.1f64..3.0, -3.0f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(ar, ai, br, bi)| {
                Primitive::Affine {
                    a: Point::new(ar, ai),
                    b: Point::new(br, bi),
                }
            }),
        ]
    }

    fn arb_holo() -> impl Strategy<Value = Primitive> {
        prop_oneof![
            (1u32..5).prop_map(|d| Primitive::Power { d }),
            prop::collection::vec(-2.0f64..2.0, 1..4).prop_map(|coeffs| Primitive::Poly { coeffs }),
            (0.1f64..2.0, -2.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(ar, ai, br, bi)| {
                Primitive::Affine {
                    a: Point::new(ar, ai),
                    b: Point::new(br, bi),
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(ps in prop::collection::vec(arb_prim(), 1..5)) {
            let e = MapExpr::new(ps).unwrap();
            let back: MapExpr = e.to_string().parse().unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn composition_coherence(a in prop::collection::vec(arb_prim(), 1..3), b in prop::collection::vec(arb_prim(), 1..3),
                                 pts in prop::collection::vec((0.1f64..2.0, 0.1f64..2.0), 2..30)) {
            let (a, b) = (MapExpr::new(a).unwrap(), MapExpr::new(b).unwrap());
            let e = PointSet::with_clamped_resolution(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect(), 1e-3, "").unwrap();
            let eps = Some(1e-9);
            if let Ok(direct) = b.then(&a).apply(&e, eps) {
                let staged = a.apply(&b.apply(&e, eps).unwrap().set, eps).unwrap();
                // dedup may drop collapsed images; compare as sets in original order
                prop_assert_eq!(direct.set.points(), staged.set.points());
            }
        }

        #[test]
        fn declared_k_multiplies(ks in prop::collection::vec(1.0f64..4.0, 0..4), d in 1u32..4) {
            let mut ps: Vec<Primitive> = ks.iter().map(|&k| Primitive::Stretch { k }).collect();
            ps.push(Primitive::Power { d });
            let e = MapExpr::new(ps).unwrap();
            let prod: f64 = ks.iter().product();
            prop_assert_eq!(e.declared_k(), prod);
            prop_assert_eq!(e.has_stretch(), !ks.is_empty());
            let r = e.estimate_dilatation(&Square::new(0.5, 0.4, 0.5), 8, 1e-6).unwrap();
            prop_assert!(r.k_hat >= 1.0);
            prop_assert!(r.k_hat <= prod * (1.0 + 1e-3), "{} > {}", r.k_hat, prod);
        }

        #[test]
        fn derivative_bound_is_lipschitz(ps in prop::collection::vec(arb_holo(), 1..3),
                                         x0 in -2.0f64..2.0, y0 in -2.0f64..2.0, side in 0.01f64..1.5,
                                         pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1000)) {
            let h = MapExpr::new(ps).unwrap();
            let q = Square::new(x0, y0, side);
            let l = h.derivative_bound(&q).unwrap();
            for (a, b, c, d) in pairs {
                let u = Point::new(x0 + a * side, y0 + b * side);
                let v = Point::new(x0 + c * side, y0 + d * side);
                let lhs = (h.eval(u, 0.0).unwrap() - h.eval(v, 0.0).unwrap()).norm();
                prop_assert!(lhs <= l * (u - v).norm() * (1.0 + 1e-9) + 1e-12, "{} > {}", lhs, l * (u - v).norm());
            }
        }
    }
}
