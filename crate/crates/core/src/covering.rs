//! Dyadic covering counts `N_d(D(z,R) ∩ E, m)` and a brute-force covering oracle.
//!
//! The root square `Q(z,R)` is axis-parallel, centered at `z`, with side `2R`.
//! At level `m` it is split into `2^m × 2^m` half-open cells of side
//! `s_m = 2^{-m}·2R`. A sample point is assigned to the cell of its floored
//! index, so every point lands in exactly one cell. Only points in the open
//! disc `|p − z| < R` are counted.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::{Point, PointSet};

/// Deepest level whose cell side stays above machine precision relative to `R`.
pub const MAX_LEVEL: u32 = 53;

/// Point budget for [`count_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 1 << 12;

#[inline]
pub(crate) fn in_disc(d: Point, radius: f64) -> bool {
    d.re * d.re + d.im * d.im < radius * radius
}

/// Scale factor `2^{m-1}/R` mapping offsets from the center to cell units.
#[inline]
fn level_scale(radius: f64, m: u32) -> f64 {
    ldexp(1.0, m as i32 - 1) / radius
}

#[inline]
pub(crate) fn ldexp(x: f64, e: i32) -> f64 {
    x * 2f64.powi(e)
}

#[inline]
fn raw_index(v: f64, scale: f64) -> i64 {
    (v * scale).floor() as i64
}

/// Level-`m` cell of `Q(z,R)` containing the offset `d = p − z`.
#[inline]
pub fn cell_index(d: Point, radius: f64, m: u32) -> (u64, u64) {
    if m == 0 {
        return (0, 0);
    }
    let scale = level_scale(radius, m);
    let half = 1i64 << (m - 1);
    let top = (1i64 << m) - 1;
    let ix = (raw_index(d.re, scale) + half).clamp(0, top);
    let iy = (raw_index(d.im, scale) + half).clamp(0, top);
    (ix as u64, iy as u64)
}

fn check_level(radius: f64, m: u32) -> Result<()> {
    if m > MAX_LEVEL {
        return Err(Error::ScaleUnderflow { level: m, radius });
    }
    Ok(())
}

/// Number of level-`m` cells of `Q(z,R)` occupied by points of `E ∩ D(z,R)`.
pub fn count_dyadic(set: &PointSet, z: Point, radius: f64, m: u32) -> Result<u64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("R must be positive, got {radius}")));
    }
    check_level(radius, m)?;
    let cells: HashSet<(u64, u64)> = set
        .points()
        .iter()
        .map(|&p| p - z)
        .filter(|&d| in_disc(d, radius))
        .map(|d| cell_index(d, radius, m))
        .collect();
    Ok(cells.len() as u64)
}

/// Lower and upper bounds on the covering number `N(D(z,R) ∩ E, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverBounds {
    /// Size of a maximal `r`-separated subset.
    pub lower: u64,
    /// Size of a greedy cover by sets of diameter at most `r`.
    pub upper: u64,
}

impl CoverBounds {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Brute-force covering bounds for small samples.
pub fn count_bruteforce(set: &PointSet, z: Point, radius: f64, r: f64) -> Result<CoverBounds> {
    if !(r > 0.0 && r <= 2.0 * radius) {
        return Err(Error::Domain(format!(
            "need 0 < r <= 2R, got r={r}, R={radius}"
        )));
    }
    let mut pts: Vec<Point> = set
        .points()
        .iter()
        .copied()
        .filter(|&p| in_disc(p - z, radius))
        .collect();
    if pts.len() > BRUTEFORCE_LIMIT {
        return Err(Error::SizeLimit {
            limit: BRUTEFORCE_LIMIT,
            got: pts.len(),
        });
    }
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // Points more than r apart can never share a set of diameter <= r.
    let mut separated: Vec<Point> = Vec::new();
    for &p in &pts {
        if separated.iter().all(|q| (p - q).norm() > r) {
            separated.push(p);
        }
    }

    // Greedy: each uncovered point seeds a disc of radius r/2.
    let half = 0.5 * r;
    let mut covered = vec![false; pts.len()];
    let mut upper = 0u64;
    for i in 0..pts.len() {
        if covered[i] {
            continue;
        }
        upper += 1;
        for j in i..pts.len() {
            if !covered[j] && (pts[j] - pts[i]).norm() <= half {
                covered[j] = true;
            }
        }
    }
    Ok(CoverBounds {
        lower: separated.len() as u64,
        upper,
    })
}

/// Scale pairs `(R, m)` admissible for the spectrum at `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub theta: f64,
    pub pairs: Vec<(f64, u32)>,
}

impl ScaleWindow {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// Cell side `2^{-m}·2R`.
#[inline]
pub fn cell_side(radius: f64, m: u32) -> f64 {
    ldexp(2.0 * radius, -(m as i32))
}

/// `2^{-m}·2R ≤ R^{1/θ} < R < 1`.
#[inline]
pub fn is_admissible(theta: f64, radius: f64, m: u32) -> bool {
    radius > 0.0 && radius < 1.0 && cell_side(radius, m) <= radius.powf(1.0 / theta)
}

pub fn admissible_pairs(
    theta: f64,
    radii: &[f64],
    m_max: u32,
    delta_eff: f64,
) -> Result<ScaleWindow> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!(
            "theta must lie in (0,1), got {theta}"
        )));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Domain(format!("R must lie in (0,1), got {r}")));
    }
    let pairs = radii
        .iter()
        .flat_map(|&r| (0..=m_max.min(MAX_LEVEL)).map(move |m| (r, m)))
        .filter(|&(r, m)| is_admissible(theta, r, m) && cell_side(r, m) >= delta_eff)
        .collect();
    Ok(ScaleWindow { theta, pairs })
}

/// Finest level whose cell side is at least `floor_side`.
pub fn finest_level(radius: f64, m_max: u32, floor_side: f64) -> Option<u32> {
    let m_cap = m_max.min(MAX_LEVEL);
    (0..=m_cap)
        .rev()
        .find(|&m| cell_side(radius, m) >= floor_side)
}

/// Dyadic counts for every `(center, R, m)` with `m` up to the finest level
/// allowed by the resolution floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    /// `counts[c][r][m]`; empty when no level is admissible for that radius.
    pub counts: Vec<Vec<Vec<u32>>>,
}

impl CountTable {
    /// Computes all counts. Results are identical to calling [`count_dyadic`]
    /// on each triple.
    pub fn build(
        set: &PointSet,
        centers: &[Point],
        radii: &[f64],
        m_max: u32,
        floor_side: f64,
    ) -> Result<Self> {
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Domain(format!("R must be positive, got {r}")));
        }
        let tree = RTree::bulk_load(
            set.points()
                .iter()
                .map(|p| [p.re, p.im])
                .collect::<Vec<_>>(),
        );
        let levels: Vec<Option<u32>> = radii
            .iter()
            .map(|&r| finest_level(r, m_max, floor_side))
            .collect();
        let counts = centers
            .par_iter()
            .map(|&z| center_counts(&tree, z, radii, &levels))
            .collect();
        Ok(Self {
            centers: centers.to_vec(),
            radii: radii.to_vec(),
            counts,
        })
    }

    pub fn get(&self, center: usize, radius: usize, m: u32) -> Option<u32> {
        self.counts[center][radius].get(m as usize).copied()
    }

    /// CSV rows `zx,zy,R,m,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zx,zy,R,m,count\n");
        for (c, z) in self.centers.iter().enumerate() {
            for (ri, r) in self.radii.iter().enumerate() {
                for (m, n) in self.counts[c][ri].iter().enumerate() {
                    let _ = writeln!(out, "{:?},{:?},{:?},{},{}", z.re, z.im, r, m, n);
                }
            }
        }
        out
    }
}

fn exact_power_of_two(r: f64) -> Option<i32> {
    if !(r > 0.0 && r.is_finite()) {
        return None;
    }
    let e = r.log2().round() as i32;
    (ldexp(1.0, e) == r).then_some(e)
}

fn center_counts(
    tree: &RTree<[f64; 2]>,
    z: Point,
    radii: &[f64],
    levels: &[Option<u32>],
) -> Vec<Vec<u32>> {
    let r_max = radii.iter().copied().fold(0.0f64, f64::max);
    let mut offsets: Vec<(Point, f64)> = tree
        .locate_within_distance([z.re, z.im], r_max * r_max)
        .map(|q| {
            let d = Point::new(q[0], q[1]) - z;
            (d, d.re * d.re + d.im * d.im)
        })
        .filter(|(_, d2)| *d2 < r_max * r_max)
        .collect();
    // Largest radius first so shrinking discs can reuse the filtered list.
    offsets.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut out = vec![Vec::new(); radii.len()];
    let mut sparse: Vec<usize> = Vec::new();
    for (ri, (&r, level)) in radii.iter().zip(levels).enumerate() {
        let Some(m_hi) = *level else { continue };
        let members = offsets.iter().filter(|(_, d2)| *d2 < r * r).count();
        if members == 0 {
            out[ri] = vec![0; m_hi as usize + 1];
            continue;
        }
        if m_hi == 0 {
            out[ri] = vec![1];
            continue;
        }
        let dense_cells = 1u64 << (2 * m_hi.min(31));
        if m_hi <= 12 && dense_cells <= (4 * members as u64).max(1 << 16) {
            let ds = offsets
                .iter()
                .filter(|(_, d2)| *d2 < r * r)
                .map(|(d, _)| *d);
            out[ri] = bitmap_counts(ds, r, m_hi);
        } else {
            sparse.push(ri);
        }
    }
    if sparse.is_empty() {
        return out;
    }

    let exps: Option<Vec<i32>> = sparse
        .iter()
        .map(|&ri| exact_power_of_two(radii[ri]))
        .collect();
    let shared_exp = exps.as_ref().and_then(|exps| {
        sparse
            .iter()
            .zip(exps)
            .map(|(&ri, &e)| levels[ri].unwrap() as i32 - 1 - e)
            .max()
    });
    let r_sparse = sparse.iter().map(|&ri| radii[ri]).fold(0.0f64, f64::max);
    let shared_exp = shared_exp.filter(|&top| top as f64 + r_sparse.log2() <= 59.0);
    match shared_exp {
        Some(top) => shared_sorted_counts(&offsets, radii, levels, &sparse, top, &mut out),
        None => {
            for &ri in &sparse {
                let r = radii[ri];
                let ds = offsets
                    .iter()
                    .filter(|(_, d2)| *d2 < r * r)
                    .map(|(d, _)| *d);
                out[ri] = sorted_counts(ds, r, levels[ri].unwrap());
            }
        }
    }
    out
}

/// Occupancy bitmap at the finest level, OR-reduced 2×2 per coarser level.
fn bitmap_counts(offsets: impl Iterator<Item = Point>, radius: f64, m_hi: u32) -> Vec<u32> {
    let side = 1usize << m_hi;
    let mut grid = vec![false; side * side];
    for d in offsets {
        let (ix, iy) = cell_index(d, radius, m_hi);
        grid[iy as usize * side + ix as usize] = true;
    }
    let mut counts = vec![0u32; m_hi as usize + 1];
    let mut cur_side = side;
    for m in (0..=m_hi).rev() {
        counts[m as usize] = grid.iter().filter(|b| **b).count() as u32;
        if m == 0 {
            break;
        }
        let half = cur_side / 2;
        let mut next = vec![false; half * half];
        for y in 0..cur_side {
            for x in 0..cur_side {
                if grid[y * cur_side + x] {
                    next[(y / 2) * half + x / 2] = true;
                }
            }
        }
        grid = next;
        cur_side = half;
    }
    counts
}

#[inline]
fn spread_bits(v: u64) -> u128 {
    let mut out = 0u128;
    for b in 0..64 {
        out |= (((v >> b) & 1) as u128) << (2 * b);
    }
    out
}

#[inline]
fn morton(ix: u64, iy: u64) -> u128 {
    spread_bits(ix) | (spread_bits(iy) << 1)
}

/// Counts from the highest differing Morton bit between sorted neighbours:
/// two keys share a cell `t` levels above the finest one iff they agree on
/// all bits at positions `>= 2t`.
fn counts_from_sorted(keys: &[u128], finest: u32) -> Vec<u32> {
    let mut hist = vec![0u32; finest as usize + 1];
    for w in keys.windows(2) {
        let x = w[0] ^ w[1];
        if x == 0 {
            continue;
        }
        let h = 127 - x.leading_zeros();
        let first_split = (finest as i64 - (h / 2) as i64).max(0) as usize;
        hist[first_split] += 1;
    }
    let mut acc = 1u32;
    hist.iter()
        .map(|h| {
            acc += h;
            acc
        })
        .collect()
}

fn sorted_counts(offsets: impl Iterator<Item = Point>, radius: f64, m_hi: u32) -> Vec<u32> {
    let mut keys: Vec<u128> = offsets
        .map(|d| {
            let (ix, iy) = cell_index(d, radius, m_hi);
            morton(ix, iy)
        })
        .collect();
    if keys.is_empty() {
        return vec![0; m_hi as usize + 1];
    }
    keys.sort_unstable();
    let mut counts = counts_from_sorted(&keys, m_hi);
    counts[0] = 1;
    counts
}

/// One sort per center serving every power-of-two radius.
///
/// With `R = 2^e`, the level-`m` index is `floor(d·2^{m-1-e}) + 2^{m-1}`, so all
/// radii share the lattice anchored at the center and coarser indices are
/// arithmetic shifts of the finest one.
fn shared_sorted_counts(
    offsets: &[(Point, f64)],
    radii: &[f64],
    levels: &[Option<u32>],
    sparse: &[usize],
    top: i32,
    out: &mut [Vec<u32>],
) {
    let r_big = sparse.iter().map(|&ri| radii[ri]).fold(0.0f64, f64::max);
    let bias = 1i64 << 61;
    let scale = ldexp(1.0, top);
    let mut keyed: Vec<(u128, f64)> = offsets
        .iter()
        .filter(|(_, d2)| *d2 < r_big * r_big)
        .map(|(d, d2)| {
            let ix = (raw_index(d.re, scale) + bias) as u64;
            let iy = (raw_index(d.im, scale) + bias) as u64;
            (morton(ix, iy), *d2)
        })
        .collect();
    keyed.sort_unstable_by_key(|a| a.0);

    let finest_bits = top as i64;
    for &ri in sparse {
        let r = radii[ri];
        let r2 = r * r;
        let m_hi = levels[ri].unwrap();
        let e = exact_power_of_two(r).unwrap() as i64;
        // Level m of this radius sits `shift(m) = top - (m - 1 - e)` bits above the finest.
        let mut hist = vec![0u32; m_hi as usize + 1];
        let mut prev: Option<u128> = None;
        let mut members = 0u32;
        for &(key, d2) in &keyed {
            if d2 >= r2 {
                continue;
            }
            members += 1;
            if let Some(p) = prev {
                let x = p ^ key;
                if x != 0 {
                    let h = (127 - x.leading_zeros()) as i64;
                    // distinct at level m iff shift(m) <= h/2
                    let m_split = finest_bits - h / 2 + 1 + e;
                    let m_split = m_split.max(1) as usize;
                    if m_split <= m_hi as usize {
                        hist[m_split] += 1;
                    }
                }
            }
            prev = Some(key);
        }
        let mut counts = vec![0u32; m_hi as usize + 1];
        if members > 0 {
            let mut acc = 1u32;
            for m in 0..=m_hi as usize {
                acc += hist[m];
                counts[m] = if m == 0 { 1 } else { acc };
            }
        }
        out[ri] = counts;
    }
}
