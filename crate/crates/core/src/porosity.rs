//! Empirical porosity by empty-disc search.
//!
//! `E` is λ-porous when every disc `D(z,r)`, `z ∈ E`, contains a disc of
//! radius `λr` missing `E`. For each probe `(z, r)` the largest relative hole
//! `max_y min(ρ(y), r − |y − z|)/r` is searched over a lattice of candidate
//! centers `y`, where `ρ(y)` is the distance to the nearest sample.

use rayon::prelude::*;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::dimension::{farthest_point_centers, DimEstimate};
use crate::error::{Error, Result};
use crate::pointset::{Point, PointSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PorosityParams {
    pub n_centers: usize,
    pub radii: Vec<f64>,
    /// Probe radii below `c_res·δ` are dropped.
    pub c_res: f64,
    /// Candidate centers per axis of the coarse lattice.
    pub lattice: usize,
    /// Subdivision factor of the single refinement around the best cell; 1 disables it.
    pub refine_factor: usize,
    pub lambda_min: f64,
}

impl Default for PorosityParams {
    fn default() -> Self {
        Self {
            n_centers: 256,
            radii: (2..=8).map(|k| 0.5f64.powi(k)).collect(),
            c_res: 4.0,
            lattice: 32,
            refine_factor: 4,
            lambda_min: 0.05,
        }
    }
}

impl PorosityParams {
    fn validate(&self) -> Result<()> {
        if self.n_centers == 0 || self.lattice < 2 || self.refine_factor == 0 {
            return Err(Error::Domain(
                "center budget, lattice and refine factor must be positive".into(),
            ));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("probe radii must be positive".into()));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < 1.0) {
            return Err(Error::Domain(format!(
                "lambda_min must lie in (0,1), got {}",
                self.lambda_min
            )));
        }
        Ok(())
    }

    /// Half the relative diagonal of the finest lattice cell: the search error bound.
    pub fn lattice_error(&self) -> f64 {
        let step = 2.0 / (self.lattice * self.refine_factor) as f64;
        step * std::f64::consts::SQRT_2 / 2.0
    }
}

/// Empty disc `D(hole_center, hole_radius)` found inside the probe `D(z, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleWitness {
    pub zx: f64,
    pub zy: f64,
    pub r: f64,
    pub hole_x: f64,
    pub hole_y: f64,
    pub hole_radius: f64,
}

impl HoleWitness {
    pub fn relative(&self) -> f64 {
        self.hole_radius / self.r
    }

    /// Number of samples strictly inside the hole; 0 for a valid witness.
    pub fn samples_inside(&self, set: &PointSet) -> usize {
        let c = Point::new(self.hole_x, self.hole_y);
        set.points()
            .iter()
            .filter(|p| (*p - c).norm() < self.hole_radius)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PorosityVerdict {
    Porous,
    NotPorous,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub lambda: f64,
    pub radii: Vec<f64>,
    pub probes: usize,
    pub worst: HoleWitness,
    pub verdict: PorosityVerdict,
    pub lambda_min: f64,
    /// Values within this distance of `lambda_min` are inconclusive.
    pub band: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<HoleWitness>>,
}

struct Index {
    tree: RTree<[f64; 2]>,
}

impl Index {
    fn new(set: &PointSet) -> Self {
        Self {
            tree: RTree::bulk_load(set.points().iter().map(|p| [p.re, p.im]).collect()),
        }
    }

    fn nearest(&self, y: Point) -> f64 {
        self.tree
            .nearest_neighbor(&[y.re, y.im])
            .map_or(f64::INFINITY, |q| (Point::new(q[0], q[1]) - y).norm())
    }
}

fn best_hole(index: &Index, z: Point, r: f64, params: &PorosityParams) -> HoleWitness {
    let hole = |y: Point| index.nearest(y).min(r - (y - z).norm());
    let n = params.lattice;
    let step = 2.0 * r / n as f64;
    let mut best = (f64::NEG_INFINITY, z);
    for iy in 0..n {
        for ix in 0..n {
            let y = z + Point::new(-r + (ix as f64 + 0.5) * step, -r + (iy as f64 + 0.5) * step);
            if (y - z).norm() >= r {
                continue;
            }
            let v = hole(y);
            if v > best.0 {
                best = (v, y);
            }
        }
    }
    if params.refine_factor > 1 {
        let fine = step / params.refine_factor as f64;
        let k = params.refine_factor as i64;
        let center = best.1;
        for iy in -k..=k {
            for ix in -k..=k {
                let y = center + Point::new(ix as f64 * fine, iy as f64 * fine);
                if (y - z).norm() >= r {
                    continue;
                }
                let v = hole(y);
                if v > best.0 {
                    best = (v, y);
                }
            }
        }
    }
    let radius = best.0.max(0.0);
    HoleWitness {
        zx: z.re,
        zy: z.im,
        r,
        hole_x: best.1.re,
        hole_y: best.1.im,
        hole_radius: radius,
    }
}

/// Porosity over explicit probes `(z, r)`.
pub fn porosity_at(
    set: &PointSet,
    probes: &[(Point, f64)],
    params: &PorosityParams,
    keep_witnesses: bool,
) -> Result<PorosityReport> {
    params.validate()?;
    if probes.is_empty() {
        return Err(Error::Resolution {
            floor: params.c_res * set.resolution(),
        });
    }
    let index = Index::new(set);
    let holes: Vec<HoleWitness> = probes
        .par_iter()
        .map(|&(z, r)| best_hole(&index, z, r, params))
        .collect();
    // ties go to the earliest probe, so the worst witness is schedule independent
    let worst = holes
        .iter()
        .copied()
        .reduce(|a, b| if b.relative() < a.relative() { b } else { a })
        .expect("probes are non-empty");
    let lambda = worst.relative().clamp(0.0, 1.0);
    let band = params.lattice_error();
    let verdict = if (lambda - params.lambda_min).abs() <= band {
        PorosityVerdict::Inconclusive
    } else if lambda > params.lambda_min {
        PorosityVerdict::Porous
    } else {
        PorosityVerdict::NotPorous
    };
    let mut radii: Vec<f64> = probes.iter().map(|p| p.1).collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    Ok(PorosityReport {
        lambda,
        radii,
        probes: probes.len(),
        worst,
        verdict,
        lambda_min: params.lambda_min,
        band,
        witnesses: keep_witnesses.then_some(holes),
    })
}

/// Probes every farthest-point center at every radius `r ≥ c_res·δ`.
pub fn estimate_porosity(
    set: &PointSet,
    params: &PorosityParams,
    keep_witnesses: bool,
) -> Result<PorosityReport> {
    set.check_normalized()?;
    params.validate()?;
    let floor = params.c_res * set.resolution();
    let radii: Vec<f64> = params
        .radii
        .iter()
        .copied()
        .filter(|&r| r >= floor)
        .collect();
    if radii.is_empty() {
        return Err(Error::Resolution { floor });
    }
    let centers = farthest_point_centers(set.points(), params.n_centers);
    let probes: Vec<(Point, f64)> = centers
        .iter()
        .flat_map(|&z| radii.iter().map(move |&r| (z, r)))
        .collect();
    porosity_at(set, &probes, params, keep_witnesses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Consistency {
    Consistent,
    Flag { alpha: f64, lambda: f64 },
    Inconclusive,
}

/// Porous sets should have dimension below 2, non-porous ones at 2.
pub fn check_luukkainen(dim: &DimEstimate, por: &PorosityReport, margin: f64) -> Consistency {
    let low = dim.value < 2.0 - margin;
    match por.verdict {
        PorosityVerdict::Inconclusive => Consistency::Inconclusive,
        PorosityVerdict::Porous if low => Consistency::Consistent,
        PorosityVerdict::NotPorous if !low => Consistency::Consistent,
        _ => Consistency::Flag {
            alpha: dim.value,
            lambda: por.lambda,
        },
    }
}
