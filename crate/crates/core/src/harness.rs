//! Bound formulas and the verification suites.
//!
//! Every suite row pairs a source estimate, a predicted bound and an image
//! estimate. A row passes iff its slack is non-negative; rows flagged as
//! expected violations must instead come out negative.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmaps::MapExpr;
use crate::dimension::{regularize_spectrum, Estimator, EstimatorParams, SpectrumCurve};
use crate::error::{Error, Result};
use crate::pointset::{generate, Point, PointSet, SetSpec};
use crate::porosity::{
    check_luukkainen, estimate_porosity, Consistency, PorosityParams, PorosityReport,
    PorosityVerdict,
};

/// Quasiregular Assouad bound `2Kα/(2+(K−1)α)`.
pub fn predict_qr_bound(alpha: f64, k: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0,2), got {alpha}"
        )));
    }
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::Domain(format!("K must be >= 1, got {k}")));
    }
    Ok(2.0 * k * alpha / (2.0 + (k - 1.0) * alpha))
}

/// `θ(t) = 1/(1+t)`.
pub fn theta_of_t(t: f64) -> f64 {
    1.0 / (1.0 + t)
}

/// Source parameter paired with `θ(t)` under a `K`-quasiregular map: `θ(t/K) = K/(K+t)`.
pub fn source_theta(t: f64, k: f64) -> f64 {
    k / (k + t)
}

/// `(θ(t), 2Kα/(2+(K−1)α))`, with `α` the source's regularized spectrum at `K/(K+t)`.
pub fn predict_spectrum_bound(t: f64, k: f64, alpha_source: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    Ok((theta_of_t(t), predict_qr_bound(alpha_source, k)?))
}

/// `β = pα/(p−2+α)`.
pub fn beta_intermediate(p: f64, alpha: f64) -> Result<f64> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(p * alpha / (p - 2.0 + alpha))
}

/// The qr bound extended to the closed range: 0 at 0, 2 at 2.
fn qr_bound_closed(alpha: f64, k: f64) -> Result<f64> {
    if alpha <= 0.0 {
        Ok(0.0)
    } else if alpha >= 2.0 {
        Ok(2.0)
    } else {
        predict_qr_bound(alpha, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    HoloNoincrease,
    QrBound,
    SpectrumBound,
    PorosityPreserve,
    Counterexamples,
    SharpnessSequences,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::HoloNoincrease,
        Suite::QrBound,
        Suite::SpectrumBound,
        Suite::PorosityPreserve,
        Suite::Counterexamples,
        Suite::SharpnessSequences,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::HoloNoincrease => "holo-noincrease",
            Suite::QrBound => "qr-bound",
            Suite::SpectrumBound => "spectrum-bound",
            Suite::PorosityPreserve => "porosity-preserve",
            Suite::Counterexamples => "counterexamples",
            Suite::SharpnessSequences => "sharpness-sequences",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown suite {s:?}")))
    }
}

/// Which inequality a row exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    HoloAssouad,
    HoloSpectrum,
    QrAssouad,
    QrSpectrum,
    PorosityPreserved,
    Luukkainen,
    Counterexample,
    Sharpness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "EXPECTED-VIOLATION")]
    ExpectedViolation,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::ExpectedViolation => "EXPECTED-VIOLATION",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub suite: Suite,
    pub row: String,
    pub tag: Tag,
    pub set: String,
    pub map: String,
    pub k: Option<f64>,
    pub theta: Option<f64>,
    pub t: Option<f64>,
    pub alpha_src: f64,
    pub bound: f64,
    pub alpha_img: f64,
    pub tolerance: f64,
    pub slack: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl BoundReport {
    pub fn is_unexpected_failure(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

pub fn reports_csv(reports: &[BoundReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Domain(format!("csv: {e}"));
    w.write_record([
        "suite",
        "row",
        "alpha_src",
        "bound",
        "alpha_img",
        "slack",
        "verdict",
    ])
    .map_err(io)?;
    for r in reports {
        w.write_record([
            r.suite.to_string(),
            r.row.clone(),
            format!("{:?}", r.alpha_src),
            format!("{:?}", r.bound),
            format!("{:?}", r.alpha_img),
            format!("{:?}", r.slack),
            r.verdict.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Sample size for the sequence sets.
    pub n_samples: usize,
    pub estimator: EstimatorParams,
    pub porosity: PorosityParams,
    pub tolerance: f64,
    pub margin: f64,
    pub thetas: Vec<f64>,
    pub ks: Vec<f64>,
    pub degrees: Vec<u32>,
    pub ts: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            estimator: EstimatorParams {
                n_centers: 256,
                ..Default::default()
            },
            porosity: PorosityParams {
                n_centers: 128,
                ..Default::default()
            },
            tolerance: 0.1,
            margin: 0.15,
            thetas: vec![0.25, 0.5, 0.75],
            ks: vec![1.5, 2.0, 4.0],
            degrees: vec![2, 3],
            ts: vec![1.0 / 3.0, 1.0, 3.0],
        }
    }
}

/// Source specs with their sample counts.
pub fn suite_sources(cfg: &SuiteConfig) -> Vec<(SetSpec, usize)> {
    vec![
        (SetSpec::SequencePower { p: 1.0 }, cfg.n_samples),
        (SetSpec::SequencePower { p: 2.0 }, cfg.n_samples),
        (
            SetSpec::Cantor {
                ratio: 1.0 / 3.0,
                depth: 8,
            },
            512,
        ),
        (SetSpec::Geometric { q: 0.5 }, 40),
    ]
}

pub const HOLO_MAPS: [&str; 3] = ["pow(2)", "pow(3)", "poly(0,1,1)"];

pub fn qr_maps(cfg: &SuiteConfig) -> Vec<(f64, u32, MapExpr)> {
    let mut out = Vec::new();
    for &k in &cfg.ks {
        for &d in &cfg.degrees {
            let e: MapExpr = format!("stretch({k:?})|pow({d})")
                .parse()
                .expect("valid map");
            out.push((k, d, e));
        }
    }
    out
}

fn parse_map(s: &str) -> MapExpr {
    s.parse().expect("built-in map expressions parse")
}

fn theta_grid(extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    g.extend_from_slice(extra);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// A normalized set with its count table.
struct Prepared {
    label: String,
    set: PointSet,
    est: Estimator,
}

impl Prepared {
    fn new(raw: &PointSet, params: &EstimatorParams) -> Result<Self> {
        let (set, _) = raw.normalize();
        let est = Estimator::new(&set, params)?;
        Ok(Self {
            label: raw.label().to_string(),
            set,
            est,
        })
    }

    fn assouad(&self) -> f64 {
        self.est.assouad().value
    }

    /// Regularized spectrum at `theta`.
    fn regularized(&self, theta: f64) -> Result<f64> {
        let grid: Vec<f64> = theta_grid(&[theta])
            .into_iter()
            .filter(|&t| t <= theta)
            .collect();
        let curve: SpectrumCurve = regularize_spectrum(&self.est.spectrum(&grid)?);
        Ok(curve.value_at(theta).expect("theta is on the grid"))
    }
}

struct Row {
    suite: Suite,
    row: String,
    tag: Tag,
    set: String,
    map: String,
    k: Option<f64>,
    theta: Option<f64>,
    t: Option<f64>,
    note: Option<String>,
}

impl Row {
    fn new(suite: Suite, tag: Tag, set: &str, map: &str, suffix: &str) -> Self {
        Self {
            suite,
            row: format!("{map} on {set}{suffix}"),
            tag,
            set: set.to_string(),
            map: map.to_string(),
            k: None,
            theta: None,
            t: None,
            note: None,
        }
    }

    /// Upper-bound row: slack = bound + tolerance − image.
    fn upper(
        self,
        alpha_src: f64,
        bound: f64,
        alpha_img: f64,
        tol: f64,
        expect_violation: bool,
    ) -> BoundReport {
        let slack = bound + tol - alpha_img;
        let verdict = match (expect_violation, slack >= 0.0) {
            (false, true) => Verdict::Pass,
            (true, false) => Verdict::ExpectedViolation,
            _ => Verdict::Fail,
        };
        self.finish(alpha_src, bound, alpha_img, tol, slack, verdict)
    }

    fn finish(
        self,
        alpha_src: f64,
        bound: f64,
        alpha_img: f64,
        tol: f64,
        slack: f64,
        verdict: Verdict,
    ) -> BoundReport {
        BoundReport {
            suite: self.suite,
            row: self.row,
            tag: self.tag,
            set: self.set,
            map: self.map,
            k: self.k,
            theta: self.theta,
            t: self.t,
            alpha_src,
            bound,
            alpha_img,
            tolerance: tol,
            slack,
            verdict,
            note: self.note,
        }
    }
}

fn wrap<T>(suite: Suite, row: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::SuiteRow {
        suite: suite.to_string(),
        row: row.to_string(),
        source: Box::new(e),
    })
}

fn prepare_sources(cfg: &SuiteConfig, suite: Suite) -> Result<Vec<(PointSet, Prepared)>> {
    suite_sources(cfg)
        .par_iter()
        .map(|(spec, n)| {
            let label = spec.label();
            let raw = wrap(suite, &label, generate(spec, *n))?;
            let prep = wrap(suite, &label, Prepared::new(&raw, &cfg.estimator))?;
            Ok((raw, prep))
        })
        .collect()
}

fn prepare_image(
    suite: Suite,
    map: &MapExpr,
    raw: &PointSet,
    params: &EstimatorParams,
) -> Result<Prepared> {
    prepare_image_excluding(suite, map, raw, params, None)
}

fn prepare_image_excluding(
    suite: Suite,
    map: &MapExpr,
    raw: &PointSet,
    params: &EstimatorParams,
    exclusion: Option<f64>,
) -> Result<Prepared> {
    let row = format!("{map} on {}", raw.label());
    let img = wrap(suite, &row, map.apply(raw, exclusion))?;
    wrap(suite, &row, Prepared::new(&img.set, params))
}

/// Runs one built-in suite; rows are sorted by id.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let mut rows = match suite {
        Suite::HoloNoincrease => holo_noincrease(cfg)?,
        Suite::QrBound => qr_rows(cfg, false)?,
        Suite::SpectrumBound => qr_rows(cfg, true)?,
        Suite::PorosityPreserve => porosity_preserve(cfg)?,
        Suite::Counterexamples => counterexamples(cfg)?,
        Suite::SharpnessSequences => sharpness(cfg)?,
    };
    rows.sort_by(|a, b| a.row.cmp(&b.row));
    Ok(rows)
}

fn holo_noincrease(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let suite = Suite::HoloNoincrease;
    let sources = prepare_sources(cfg, suite)?;
    let jobs: Vec<(usize, &str)> = (0..sources.len())
        .flat_map(|i| HOLO_MAPS.iter().map(move |m| (i, *m)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(i, m)| {
            let (raw, src) = &sources[i];
            let img = prepare_image(suite, &parse_map(m), raw, &cfg.estimator)?;
            let mut out = vec![
                Row::new(suite, Tag::HoloAssouad, &src.label, m, " / assouad").upper(
                    src.assouad(),
                    src.assouad(),
                    img.assouad(),
                    cfg.tolerance,
                    false,
                ),
            ];
            for &theta in &cfg.thetas {
                let mut row = Row::new(
                    suite,
                    Tag::HoloSpectrum,
                    &src.label,
                    m,
                    &format!(" / theta={theta}"),
                );
                row.theta = Some(theta);
                let a = wrap(suite, &row.row, src.regularized(theta))?;
                let b = wrap(suite, &row.row, img.regularized(theta))?;
                out.push(row.upper(a, a, b, cfg.tolerance, false));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn qr_rows(cfg: &SuiteConfig, spectrum: bool) -> Result<Vec<BoundReport>> {
    let suite = if spectrum {
        Suite::SpectrumBound
    } else {
        Suite::QrBound
    };
    let sources = prepare_sources(cfg, suite)?;
    let maps = qr_maps(cfg);
    let jobs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..maps.len()).map(move |j| (i, j)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (raw, src) = &sources[i];
            let (k, _, map) = &maps[j];
            let name = map.to_string();
            let img = prepare_image(suite, map, raw, &cfg.estimator)?;
            let mut out = Vec::new();
            if !spectrum {
                let mut row = Row::new(suite, Tag::QrAssouad, &src.label, &name, " / assouad");
                row.k = Some(*k);
                let a = src.assouad();
                let bound = wrap(suite, &row.row, qr_bound_closed(a, *k))?;
                out.push(row.upper(a, bound, img.assouad(), cfg.tolerance, false));
            } else {
                for &t in &cfg.ts {
                    let theta = theta_of_t(t);
                    let mut row = Row::new(
                        suite,
                        Tag::QrSpectrum,
                        &src.label,
                        &name,
                        &format!(" / t={t:.4}"),
                    );
                    row.k = Some(*k);
                    row.t = Some(t);
                    row.theta = Some(theta);
                    let src_theta = source_theta(t, *k);
                    row.note = Some(format!("source spectrum read at theta={src_theta:.6}"));
                    let a = wrap(suite, &row.row, src.regularized(src_theta))?;
                    let bound = wrap(suite, &row.row, qr_bound_closed(a, *k))?;
                    let b = wrap(suite, &row.row, img.regularized(theta))?;
                    out.push(row.upper(a, bound, b, cfg.tolerance, false));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

struct PorosityView {
    alpha: f64,
    por: PorosityReport,
}

fn porosity_view(suite: Suite, row: &str, p: &Prepared, cfg: &SuiteConfig) -> Result<PorosityView> {
    let por = wrap(suite, row, estimate_porosity(&p.set, &cfg.porosity, false))?;
    Ok(PorosityView {
        alpha: p.assouad(),
        por,
    })
}

fn luukkainen_row(
    suite: Suite,
    set: &str,
    map: &str,
    v: &PorosityView,
    cfg: &SuiteConfig,
) -> BoundReport {
    let mut row = Row::new(suite, Tag::Luukkainen, set, map, " / luukkainen");
    if map.is_empty() {
        row.row = format!("{set} / luukkainen");
    }
    let threshold = 2.0 - cfg.margin;
    let dim = crate::dimension::DimEstimate {
        value: v.alpha,
        mode: crate::dimension::Mode::Assouad,
        count_threshold: cfg.estimator.m_min,
        witness: None,
        envelope_slope: None,
        convergence_slope: None,
    };
    let c = check_luukkainen(&dim, &v.por, cfg.margin);
    // distance to the wrong side of the dimension threshold
    let slack = match (c, v.por.verdict) {
        (Consistency::Consistent, PorosityVerdict::Porous) => threshold - v.alpha,
        (Consistency::Consistent, _) => v.alpha - threshold,
        (Consistency::Flag { .. }, _) => -(threshold - v.alpha).abs(),
        (Consistency::Inconclusive, _) => -1.0,
    };
    row.note = Some(format!("porosity {:?}, consistency {:?}", v.por.verdict, c));
    let verdict = if c == Consistency::Consistent {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    row.finish(v.por.lambda, threshold, v.alpha, cfg.margin, slack, verdict)
}

fn porosity_preserve(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let suite = Suite::PorosityPreserve;
    let sources = prepare_sources(cfg, suite)?;
    let mut maps: Vec<MapExpr> = HOLO_MAPS.iter().map(|m| parse_map(m)).collect();
    maps.extend(qr_maps(cfg).into_iter().map(|(_, _, m)| m));

    let grid_raw = wrap(
        suite,
        "grid:512",
        generate(&SetSpec::Grid { n: 512 }, 512 * 512),
    )?;
    let grid = wrap(suite, "grid:512", Prepared::new(&grid_raw, &cfg.estimator))?;
    let grid_view = porosity_view(suite, "grid:512", &grid, cfg)?;
    let mut out = vec![luukkainen_row(suite, &grid.label, "", &grid_view, cfg)];

    let src_views = sources
        .par_iter()
        .map(|(_, p)| porosity_view(suite, &p.label, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    for ((_, p), v) in sources.iter().zip(&src_views) {
        out.push(luukkainen_row(suite, &p.label, "", v, cfg));
    }

    let jobs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..maps.len()).map(move |j| (i, j)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (raw, src) = &sources[i];
            let sv = &src_views[i];
            let map = &maps[j];
            let name = map.to_string();
            let img = prepare_image(suite, map, raw, &cfg.estimator)?;
            let row_id = format!("{name} on {}", src.label);
            let iv = porosity_view(suite, &row_id, &img, cfg)?;
            let mut rows = Vec::new();
            if sv.por.verdict == PorosityVerdict::Porous {
                let mut row = Row::new(
                    suite,
                    Tag::PorosityPreserved,
                    &src.label,
                    &name,
                    " / porous",
                );
                row.note = Some(format!("image porosity {:?}", iv.por.verdict));
                let slack = iv.por.lambda - (cfg.porosity.lambda_min + iv.por.band);
                let verdict = if iv.por.verdict == PorosityVerdict::Porous {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                rows.push(row.finish(
                    sv.por.lambda,
                    cfg.porosity.lambda_min,
                    iv.por.lambda,
                    iv.por.band,
                    slack,
                    verdict,
                ));
            }
            rows.push(luukkainen_row(suite, &src.label, &name, &iv, cfg));
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    out.extend(per_job.into_iter().flatten());
    Ok(out)
}

/// Estimator settings for the logarithm counterexample: the image is an
/// integer lattice, so its sampling gap is its true resolution.
pub fn counterexample_params(cfg: &SuiteConfig) -> EstimatorParams {
    EstimatorParams {
        c_res: 1.0,
        m_min: 16,
        ..cfg.estimator.clone()
    }
}

fn counterexamples(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let suite = Suite::Counterexamples;
    let mut out = Vec::new();

    let spec = SetSpec::Geometric { q: (-1.0f64).exp() };
    let raw = wrap(suite, "neglog", generate(&spec, 30))?;
    let params = counterexample_params(cfg);
    let src = wrap(suite, "neglog", Prepared::new(&raw, &params))?;
    // the sample approaches the slit point 0 geometrically; exclude only half its nearest distance
    let nearest = raw
        .points()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    let img = prepare_image_excluding(
        suite,
        &parse_map("neglog"),
        &raw,
        &params,
        Some(0.5 * nearest),
    )?;
    let mut row = Row::new(
        suite,
        Tag::Counterexample,
        &src.label,
        "neglog",
        " / assouad",
    );
    row.note =
        Some("image is the integers 1..30; the domain excludes the accumulation point".into());
    let a = src.assouad();
    out.push(row.upper(a, a, img.assouad(), cfg.tolerance, true));

    // the integers are unbounded: their spectrum is read in native units, where every disc of radius < 1 holds one point
    let n = cfg.n_samples;
    let ints: Vec<Point> = (1..=n).map(|k| Point::new(k as f64, 0.0)).collect();
    let ints = wrap(
        suite,
        "recip",
        PointSet::new(ints, 1.0, format!("integers:{n}")),
    )?;
    let src_est = wrap(suite, "recip", Estimator::in_frame(&ints, &cfg.estimator))?;
    let img = prepare_image(suite, &parse_map("recip"), &ints, &cfg.estimator)?;
    for &theta in &cfg.thetas {
        let mut row = Row::new(
            suite,
            Tag::Counterexample,
            ints.label(),
            "recip",
            &format!(" / theta={theta}"),
        );
        row.theta = Some(theta);
        row.note = Some("source estimated in native units (unbounded set)".into());
        let a = wrap(suite, &row.row, src_est.spectrum_at(theta))?.alpha;
        let b = wrap(suite, &row.row, img.regularized(theta))?;
        out.push(row.upper(a, a, b, cfg.tolerance, true));
    }
    Ok(out)
}

/// Spectrum of `{n^{−p}}`: `min{1/((p+1)(1−θ)), 1}`.
pub fn sequence_spectrum(p: f64, theta: f64) -> f64 {
    (1.0 / ((p + 1.0) * (1.0 - theta))).min(1.0)
}

fn sharpness(cfg: &SuiteConfig) -> Result<Vec<BoundReport>> {
    let suite = Suite::SharpnessSequences;
    let raw = wrap(
        suite,
        "seq:1",
        generate(&SetSpec::SequencePower { p: 1.0 }, cfg.n_samples),
    )?;
    let ks: Vec<f64> = std::iter::once(1.0).chain(cfg.ks.iter().copied()).collect();
    let per_k = ks
        .par_iter()
        .map(|&k| {
            let map = parse_map(&format!("stretch({k:?})"));
            let name = map.to_string();
            let img = prepare_image(suite, &map, &raw, &cfg.estimator)?;
            let mut rows = Vec::new();
            for &theta in &cfg.thetas {
                let mut row = Row::new(
                    suite,
                    Tag::Sharpness,
                    raw.label(),
                    &name,
                    &format!(" / theta={theta}"),
                );
                row.k = Some(k);
                row.theta = Some(theta);
                let target = sequence_spectrum(1.0 / k, theta);
                row.note = Some(format!("target spectrum of n^(-1/K) at theta={theta}"));
                let b = wrap(suite, &row.row, img.regularized(theta))?;
                let slack = cfg.tolerance - (b - target).abs();
                let verdict = if slack >= 0.0 {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                rows.push(row.finish(target, target, b, cfg.tolerance, slack, verdict));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_k.into_iter().flatten().collect())
}
