//! Assouad dimension and regularized Assouad spectrum estimates.
//!
//! The estimator is a max-ratio over dyadic counts: for each admissible
//! `(z, R, m)` with `N_d(D(z,R) ∩ E, m) ≥ M_min` it forms `log₂ N_d / m` and
//! reports the maximum. Ties go to the smaller level, then the
//! lexicographically smaller center, then the larger radius, so the result
//! does not depend on evaluation order.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::covering::{cell_side, finest_level, is_admissible, CountTable};
use crate::error::{Error, Result};
use crate::pointset::{Point, PointSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorParams {
    /// Center budget; larger sets are thinned by farthest-point sampling.
    pub n_centers: usize,
    pub radii: Vec<f64>,
    pub m_max: u32,
    /// Smallest probed cell side is `c_res·δ`.
    pub c_res: f64,
    /// Minimum count for a scale pair to contribute.
    pub m_min: u32,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            n_centers: 4096,
            radii: (1..=10).map(|k| 0.5f64.powi(k)).collect(),
            m_max: 26,
            c_res: 4.0,
            m_min: 8,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_centers == 0 {
            return Err(Error::Domain("center budget must be positive".into()));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Domain(
                "R-grid must be non-empty and inside (0,1)".into(),
            ));
        }
        if !(self.c_res > 0.0 && self.c_res.is_finite()) {
            return Err(Error::Domain(format!(
                "c_res must be positive, got {}",
                self.c_res
            )));
        }
        if self.m_min < 1 {
            return Err(Error::Domain("count threshold must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scale triple at which an estimate is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub zx: f64,
    pub zy: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub m: u32,
    pub count: u64,
}

impl Witness {
    pub fn center(&self) -> Point {
        Point::new(self.zx, self.zy)
    }

    pub fn ratio(&self) -> f64 {
        (self.count as f64).log2() / self.m as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Assouad,
    Spectrum { theta: f64 },
    QuasiAssouad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub value: f64,
    pub mode: Mode,
    pub count_threshold: u32,
    pub witness: Option<Witness>,
    /// Least-squares slope of the upper envelope `max log₂ N` against `m`.
    pub envelope_slope: Option<f64>,
    /// Slope over the last three spectrum samples (quasi-Assouad only).
    pub convergence_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub theta: f64,
    pub alpha: f64,
    pub pairs_used: usize,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub samples: Vec<SpectrumSample>,
}

impl SpectrumCurve {
    pub fn value_at(&self, theta: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.theta == theta)
            .map(|s| s.alpha)
    }

    /// CSV with columns `theta,alpha,pairs_used,argmax_zx,argmax_zy,argmax_R,argmax_m,count`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("theta,alpha,pairs_used,argmax_zx,argmax_zy,argmax_R,argmax_m,count\n");
        for s in &self.samples {
            match s.witness {
                Some(w) => {
                    let _ = writeln!(
                        out,
                        "{:?},{:?},{},{:?},{:?},{:?},{},{}",
                        s.theta, s.alpha, s.pairs_used, w.zx, w.zy, w.radius, w.m, w.count
                    );
                }
                None => {
                    let _ = writeln!(out, "{:?},{:?},{},,,,,", s.theta, s.alpha, s.pairs_used);
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                path: "<spectrum csv>".into(),
                line: i + 1,
                msg: format!("malformed row {line:?}"),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let witness = if f[3].is_empty() {
                None
            } else {
                Some(Witness {
                    zx: num(f[3])?,
                    zy: num(f[4])?,
                    radius: num(f[5])?,
                    m: f[6].parse().map_err(|_| bad())?,
                    count: f[7].parse().map_err(|_| bad())?,
                })
            };
            samples.push(SpectrumSample {
                theta: num(f[0])?,
                alpha: num(f[1])?,
                pairs_used: f[2].parse().map_err(|_| bad())?,
                witness,
                note: None,
            });
        }
        Ok(Self { samples })
    }
}

/// Farthest-point subsample of `k` points seeded at the lexicographically
/// smallest point; ties resolve to the lexicographically smaller point.
pub fn farthest_point_centers(points: &[Point], k: usize) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(lex);
    if pts.len() <= k {
        return pts;
    }
    let mut chosen = Vec::with_capacity(k);
    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut next = 0usize;
    for _ in 0..k {
        let c = pts[next];
        chosen.push(c);
        let mut best = (-1.0f64, 0usize);
        for (i, p) in pts.iter().enumerate() {
            let d = (p - c).norm_sqr();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best.0 {
                best = (dist[i], i);
            }
        }
        next = best.1;
    }
    chosen
}

fn lex(a: &Point, b: &Point) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    center: usize,
    radius: usize,
    m: u32,
    count: u32,
}

/// Precomputed counts for a set; evaluates the Assouad estimate and any
/// number of spectrum samples without recounting.
#[derive(Debug, Clone)]
pub struct Estimator {
    params: EstimatorParams,
    table: CountTable,
}

impl Estimator {
    /// Requires a normalized set (diameter 1/2, centered at the origin).
    pub fn new(set: &PointSet, params: &EstimatorParams) -> Result<Self> {
        set.check_normalized()?;
        Self::in_frame(set, params)
    }

    /// Skips the normalization check: radii are interpreted in the set's own units.
    pub fn in_frame(set: &PointSet, params: &EstimatorParams) -> Result<Self> {
        params.validate()?;
        let centers = farthest_point_centers(set.points(), params.n_centers);
        let floor_side = params.c_res * set.resolution();
        let table = CountTable::build(set, &centers, &params.radii, params.m_max, floor_side)?;
        Ok(Self {
            params: params.clone(),
            table,
        })
    }

    pub fn table(&self) -> &CountTable {
        &self.table
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    fn better(&self, a: &Candidate, b: &Candidate) -> bool {
        match a.value.total_cmp(&b.value) {
            Ordering::Greater => return true,
            Ordering::Less => return false,
            Ordering::Equal => {}
        }
        if a.m != b.m {
            return a.m < b.m;
        }
        match lex(&self.table.centers[a.center], &self.table.centers[b.center]) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        self.table.radii[a.radius] > self.table.radii[b.radius]
    }

    fn best<F: Fn(usize, u32) -> bool>(&self, admissible: F) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for (c, per_center) in self.table.counts.iter().enumerate() {
            for (ri, per_radius) in per_center.iter().enumerate() {
                for (m, &count) in per_radius.iter().enumerate().skip(1) {
                    let m = m as u32;
                    if count < self.params.m_min || !admissible(ri, m) {
                        continue;
                    }
                    let cand = Candidate {
                        value: (count as f64).log2() / m as f64,
                        center: c,
                        radius: ri,
                        m,
                        count,
                    };
                    if best.as_ref().is_none_or(|b| self.better(&cand, b)) {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    }

    fn witness(&self, c: &Candidate) -> Witness {
        let z = self.table.centers[c.center];
        Witness {
            zx: z.re,
            zy: z.im,
            radius: self.table.radii[c.radius],
            m: c.m,
            count: c.count as u64,
        }
    }

    fn envelope_slope(&self) -> Option<f64> {
        let mut env: Vec<Option<f64>> = vec![None; self.params.m_max as usize + 1];
        for per_center in &self.table.counts {
            for per_radius in per_center {
                for (m, &count) in per_radius.iter().enumerate().skip(1) {
                    if count >= self.params.m_min {
                        let v = (count as f64).log2();
                        env[m] = Some(env[m].map_or(v, |e: f64| e.max(v)));
                    }
                }
            }
        }
        let pts: Vec<(f64, f64)> = env
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.map(|v| (m as f64, v)))
            .collect();
        least_squares_slope(&pts)
    }

    pub fn assouad(&self) -> DimEstimate {
        let best = self.best(|_, _| true);
        DimEstimate {
            value: best.map_or(0.0, |b| b.value.clamp(0.0, 2.0)),
            mode: Mode::Assouad,
            count_threshold: self.params.m_min,
            witness: best.map(|b| self.witness(&b)),
            envelope_slope: self.envelope_slope(),
            convergence_slope: None,
        }
    }

    /// Number of `(R, m)` pairs admissible at `θ` above the resolution floor.
    fn window_size(&self, theta: f64) -> usize {
        self.table
            .radii
            .iter()
            .enumerate()
            .map(|(ri, &r)| {
                let levels = self.table.counts.first().map_or(0, |c| c[ri].len());
                (1..levels as u32)
                    .filter(|&m| is_admissible(theta, r, m))
                    .count()
            })
            .sum()
    }

    pub fn spectrum_at(&self, theta: f64) -> Result<SpectrumSample> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!(
                "theta must lie in (0,1), got {theta}"
            )));
        }
        let radii = &self.table.radii;
        let pairs_used = self.window_size(theta);
        let best = self.best(|ri, m| is_admissible(theta, radii[ri], m));
        let note = if pairs_used == 0 {
            Some("no admissible pairs".to_string())
        } else if best.is_none() {
            Some("no pair reaches the count threshold".to_string())
        } else {
            None
        };
        Ok(SpectrumSample {
            theta,
            alpha: best.map_or(0.0, |b| b.value.clamp(0.0, 2.0)),
            pairs_used,
            witness: best.map(|b| self.witness(&b)),
            note,
        })
    }

    pub fn spectrum(&self, thetas: &[f64]) -> Result<SpectrumCurve> {
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "theta grid must be strictly increasing".into(),
            ));
        }
        let samples = thetas
            .iter()
            .map(|&t| self.spectrum_at(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectrumCurve { samples })
    }
}

pub fn estimate_assouad(set: &PointSet, params: &EstimatorParams) -> Result<DimEstimate> {
    Ok(Estimator::new(set, params)?.assouad())
}

pub fn estimate_spectrum(
    set: &PointSet,
    thetas: &[f64],
    params: &EstimatorParams,
) -> Result<SpectrumCurve> {
    Estimator::new(set, params)?.spectrum(thetas)
}

/// Running maximum over `θ`: turns an original-spectrum curve into a regularized one.
pub fn regularize_spectrum(curve: &SpectrumCurve) -> SpectrumCurve {
    let mut running = f64::NEG_INFINITY;
    let mut best_witness = None;
    let samples = curve
        .samples
        .iter()
        .map(|s| {
            let mut out = s.clone();
            if s.alpha > running {
                running = s.alpha;
                best_witness = s.witness;
            } else {
                out.alpha = running;
                out.witness = best_witness;
            }
            out
        })
        .collect();
    SpectrumCurve { samples }
}

pub const QUASI_ASSOUAD_MIN_THETA: f64 = 0.9;

/// Value at the largest sampled `θ`, with the slope of the last three samples.
pub fn estimate_quasi_assouad(curve: &SpectrumCurve) -> Result<DimEstimate> {
    let last = curve
        .samples
        .iter()
        .filter(|s| s.theta >= QUASI_ASSOUAD_MIN_THETA)
        .max_by(|a, b| a.theta.total_cmp(&b.theta))
        .ok_or(Error::InsufficientRange {
            min_theta: QUASI_ASSOUAD_MIN_THETA,
        })?;
    let mut sorted: Vec<&SpectrumSample> = curve.samples.iter().collect();
    sorted.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let tail: Vec<(f64, f64)> = sorted
        .iter()
        .rev()
        .take(3)
        .map(|s| (s.theta, s.alpha))
        .collect();
    Ok(DimEstimate {
        value: last.alpha,
        mode: Mode::QuasiAssouad,
        count_threshold: last.witness.map_or(0, |w| w.count as u32),
        witness: last.witness,
        envelope_slope: None,
        convergence_slope: Some(least_squares_slope(&tail).unwrap_or(0.0)),
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Recomputes the ratio at a witness from scratch.
pub fn reevaluate_witness(set: &PointSet, w: &Witness) -> Result<f64> {
    let n = crate::covering::count_dyadic(set, w.center(), w.radius, w.m)?;
    Ok((n as f64).log2() / w.m as f64)
}

/// Smallest probed cell side for the given radius, if any level qualifies.
pub fn finest_side(set: &PointSet, params: &EstimatorParams, radius: f64) -> Option<f64> {
    finest_level(radius, params.m_max, params.c_res * set.resolution())
        .map(|m| cell_side(radius, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{generate, SetSpec};
    use proptest::prelude::*;

    fn normalized(spec: SetSpec, n: usize) -> PointSet {
        generate(&spec, n).unwrap().normalize().0
    }

    #[test]
    fn single_point_is_zero() {
        let e = PointSet::new(vec![Point::new(0.0, 0.0)], 1.0, "").unwrap();
        let d = estimate_assouad(&e, &EstimatorParams::default()).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.witness.is_none());
    }

    #[test]
    fn unnormalized_input_rejected() {
        let e = generate(&SetSpec::SequencePower { p: 1.0 }, 50).unwrap();
        assert!(matches!(
            estimate_assouad(&e, &EstimatorParams::default()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn filled_square_is_two_dimensional() {
        let e = normalized(SetSpec::Grid { n: 256 }, 256 * 256);
        let params = EstimatorParams {
            n_centers: 256,
            ..Default::default()
        };
        let d = estimate_assouad(&e, &params).unwrap();
        assert!((1.9..=2.0).contains(&d.value), "{d:?}");
    }

    #[test]
    fn witness_reproduces_value() {
        let e = normalized(SetSpec::SequencePower { p: 1.0 }, 2000);
        let params = EstimatorParams {
            n_centers: 256,
            ..Default::default()
        };
        let est = Estimator::new(&e, &params).unwrap();
        let d = est.assouad();
        let w = d.witness.unwrap();
        assert_eq!(reevaluate_witness(&e, &w).unwrap(), d.value);
        let s = est.spectrum_at(0.5).unwrap();
        let w = s.witness.unwrap();
        assert_eq!(reevaluate_witness(&e, &w).unwrap(), s.alpha);
    }

    #[test]
    fn regularize_running_max() {
        let mk = |pts: &[(f64, f64)]| SpectrumCurve {
            samples: pts
                .iter()
                .map(|&(theta, alpha)| SpectrumSample {
                    theta,
                    alpha,
                    pairs_used: 1,
                    witness: None,
                    note: None,
                })
                .collect(),
        };
        let out = regularize_spectrum(&mk(&[(0.2, 0.5), (0.4, 0.3), (0.6, 0.7)]));
        let vals: Vec<f64> = out.samples.iter().map(|s| s.alpha).collect();
        assert_eq!(vals, vec![0.5, 0.5, 0.7]);
        let mono = mk(&[(0.1, 0.1), (0.5, 0.4), (0.9, 0.4)]);
        assert_eq!(regularize_spectrum(&mono), mono);
    }

    #[test]
    fn quasi_assouad_from_curve() {
        let mk = |thetas: &[f64], v: f64| SpectrumCurve {
            samples: thetas
                .iter()
                .map(|&theta| SpectrumSample {
                    theta,
                    alpha: v,
                    pairs_used: 1,
                    witness: None,
                    note: None,
                })
                .collect(),
        };
        let q = estimate_quasi_assouad(&mk(&[0.5, 0.8, 0.9, 0.95], 0.7)).unwrap();
        assert_eq!(q.value, 0.7);
        assert!(q.convergence_slope.unwrap().abs() < 1e-12);
        assert!(matches!(
            estimate_quasi_assouad(&mk(&[0.1, 0.3, 0.5], 0.7)),
            Err(Error::InsufficientRange { .. })
        ));
    }

    #[test]
    fn empty_window_is_reported() {
        let e = normalized(SetSpec::SequencePower { p: 1.0 }, 200);
        let params = EstimatorParams {
            m_max: 3,
            n_centers: 64,
            ..Default::default()
        };
        let s = Estimator::new(&e, &params)
            .unwrap()
            .spectrum_at(0.05)
            .unwrap();
        assert_eq!(s.alpha, 0.0);
        assert_eq!(s.pairs_used, 0);
        assert_eq!(s.note.as_deref(), Some("no admissible pairs"));
    }

    #[test]
    fn csv_round_trip() {
        let e = normalized(SetSpec::SequencePower { p: 1.0 }, 500);
        let params = EstimatorParams {
            n_centers: 64,
            ..Default::default()
        };
        let mut curve = estimate_spectrum(&e, &[0.3, 0.6, 0.9], &params).unwrap();
        for s in &mut curve.samples {
            s.note = None;
        }
        assert_eq!(SpectrumCurve::from_csv(&curve.to_csv()).unwrap(), curve);
    }

    #[test]
    fn fps_is_deterministic_and_spread() {
        let e = generate(&SetSpec::Grid { n: 20 }, 400).unwrap();
        let a = farthest_point_centers(e.points(), 4);
        assert_eq!(a, farthest_point_centers(e.points(), 4));
        assert_eq!(a[0], Point::new(0.0, 0.0));
        assert!((a[1] - Point::new(0.95, 0.95)).norm() < 1e-12);
    }

    fn arb_set() -> impl Strategy<Value = PointSet> {
        prop::collection::vec((0u32..30, 0.0f64..1.0, 0.0f64..1.0), 3..120).prop_map(|v| {
            let pts: Vec<Point> = v
                .into_iter()
                .map(|(k, a, b)| {
                    let s = 0.6f64.powi(k as i32);
                    Point::new(s * a, s * b * 0.3)
                })
                .collect();
            let e = PointSet::with_clamped_resolution(pts, 1e-7, "p").unwrap();
            e.normalize().0
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn curve_invariants(e in arb_set()) {
            let params = EstimatorParams { m_min: 4, ..Default::default() };
            let est = Estimator::new(&e, &params).unwrap();
            let thetas: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
            let curve = est.spectrum(&thetas).unwrap();
            let a = est.assouad().value;
            for w in curve.samples.windows(2) {
                prop_assert!(w[0].alpha <= w[1].alpha);
            }
            for s in &curve.samples {
                prop_assert!((0.0..=2.0).contains(&s.alpha));
                prop_assert!(s.alpha <= a);
            }
        }

        #[test]
        fn similarity_invariance(e in arb_set(), scale in 0.01f64..100.0, sx in -5.0f64..5.0, sy in -5.0f64..5.0) {
            let params = EstimatorParams { m_min: 4, ..Default::default() };
            let moved: Vec<Point> = e.points().iter().map(|p| p * scale + Point::new(sx, sy)).collect();
            let f = PointSet::with_clamped_resolution(moved, e.resolution() * scale, "s").unwrap();
            let (f, _) = f.normalize();
            // normalization cancels the similarity up to rounding in the coordinates
            let a = estimate_assouad(&e, &params).unwrap().value;
            let b = estimate_assouad(&f, &params).unwrap().value;
            prop_assert!((a - b).abs() <= 0.35, "{} vs {}", a, b);
        }

        #[test]
        fn subset_monotone(e in arb_set(), keep in 0.2f64..1.0) {
            let params = EstimatorParams { m_min: 4, ..Default::default() };
            let n = ((e.len() as f64 * keep) as usize).max(1);
            let sub = PointSet::new(e.points()[..n].to_vec(), e.resolution(), "sub").unwrap();
            let est_f = Estimator::in_frame(&e, &params).unwrap();
            let est_e = Estimator::in_frame(&sub, &params).unwrap();
            prop_assert!(est_e.assouad().value <= est_f.assouad().value);
            for t in [0.25, 0.5, 0.75] {
                prop_assert!(est_e.spectrum_at(t).unwrap().alpha <= est_f.spectrum_at(t).unwrap().alpha);
            }
        }
    }
}
