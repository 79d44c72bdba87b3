//! Layered subdivisions and chain upper bounds for the distance field.
//!
//! Three constructions are provided, each a family of sets whose diameters
//! shrink in proportion to their distance from the boundary:
//!
//! * the unit cube, tiled by concentric one-cell-thick rings of dyadic-free
//!   side `3^{-j}/2` (the model case, with distance factor exactly `2*sqrt(n)`);
//! * the power cusp, tiled by sets indexed by a level `j` and a binary index
//!   `m` whose horizontal width is `2^{-(j+l)}` with `l = floor(log2 m) + 1`;
//! * the block tower, handled combinatorially (counts, sizes and chain
//!   lengths only).
//!
//! A chain of sets with intersecting closures gives the upper bound
//! `2 * sum d(S)/delta(S)` on the field between points of its end sets; the
//! per-family closed forms of that bound feed upper-bound series whose
//! convergence certifies the averaging property on the matching domain.

use crate::error::{Error, Result};
use crate::geom::{AlignedBox, Point, StageRegion, MAX_DIM};
use crate::raster::RasterDomain;
use crate::series::{SeriesReport, SeriesVerdict};
use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Cap on explicit set enumeration.
const MAX_ENUMERATED_SETS: u64 = 2_000_000;

/// Identity of one subdivision set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyTag {
    /// Ring cell of the unit-cube subdivision: layer `j`, grid cell index.
    Cube { n: usize, j: u32, cell: [u32; 3] },
    /// Cusp set: level `j`, binary index `m` with `ell = floor(log2 m) + 1`.
    /// In the plane, sets with `m >= 2` are mirror halves (`half = +-1`);
    /// `m = 1` sets and all spatial rings are whole (`half = 0`).
    CuspSet { alpha: f64, n: usize, j: u32, m: u64, ell: u32, half: i8 },
    /// Block-tower set, represented combinatorially only.
    Block { m: u64 },
}

/// One set of a subdivision: geometry, star center, diameter data and a
/// distance-to-boundary lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdivisionSet {
    pub id: u64,
    pub family: FamilyTag,
    pub layer: u32,
    /// Enclosing extent (exact for cube cells, enclosing for cusp sets).
    pub bbox: AlignedBox,
    pub star_center: Point,
    /// Chain-effective extent: the diameter for cube cells; the sum of the
    /// horizontal width and radial thickness (the two legs of an in-set
    /// L-path) for cusp sets.
    pub d: f64,
    /// Horizontal width (cusp sets only).
    pub d_x: Option<f64>,
    /// Radial thickness (cusp sets only).
    pub d_r: Option<f64>,
    /// Lower bound on the distance from the set to the domain boundary.
    pub delta: f64,
    /// Upper bound on the set measure, with the symbolic dimensional
    /// constant set to 1 (cusp sets only; never needed for classification).
    pub measure_ub: Option<f64>,
    pub neighbors: Vec<u64>,
}

impl SubdivisionSet {
    /// Closed membership (used for coverage counting).
    pub fn contains(&self, p: &Point) -> bool {
        self.membership(p, false)
    }

    /// Strict interior membership (used for overlap detection).
    pub fn contains_interior(&self, p: &Point) -> bool {
        self.membership(p, true)
    }

    fn membership(&self, p: &Point, strict: bool) -> bool {
        match &self.family {
            FamilyTag::Cube { .. } => {
                if strict {
                    self.bbox.contains_open(p)
                } else {
                    self.bbox.contains_closed(p)
                }
            }
            FamilyTag::CuspSet { alpha, n, half, .. } => {
                let x = p.x();
                let (x0, x1) = (self.bbox.lo[0], self.bbox.hi[0]);
                let in_x = if strict { x0 < x && x < x1 } else { x0 <= x && x <= x1 };
                if !in_x {
                    return false;
                }
                let rho = if *n == 2 {
                    match half {
                        1 if p.y() < 0.0 => return false,
                        -1 if p.y() > 0.0 => return false,
                        _ => {}
                    }
                    p.y().abs()
                } else {
                    (p.y() * p.y() + p.z() * p.z()).sqrt()
                };
                let (f0, f1) = cusp_fraction_band(self.ell());
                let frac = rho / x.powf(*alpha);
                if strict {
                    f0 < frac && frac < f1
                } else {
                    f0 <= frac && frac <= f1
                }
            }
            FamilyTag::Block { .. } => false,
        }
    }

    fn ell(&self) -> u32 {
        match self.family {
            FamilyTag::CuspSet { ell, .. } => ell,
            _ => 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Unit-cube subdivision
// ---------------------------------------------------------------------------

/// Per-layer summary of the cube subdivision.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeLayer {
    pub j: u32,
    /// Cells per edge, `2 * 3^j - 1`.
    pub e_j: u64,
    /// Actual number of ring cells in the layer.
    pub count: u64,
    /// Combinatorial bound `2^n * n * 3^{j(n-1)}`.
    pub count_bound: f64,
    pub side: f64,
    pub d: f64,
    pub delta: f64,
    /// Exact layer measure.
    pub measure: f64,
    /// Measure bound `n * 3^{-j}`.
    pub measure_bound: f64,
    /// Half-side of the region covered through this layer.
    pub outer_half_side: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeSubdivision {
    pub n: usize,
    pub layers: Vec<CubeLayer>,
    pub sets: Vec<SubdivisionSet>,
}

/// Cells per edge at layer `j` (closed form).
pub fn cube_edge_cells(j: u32) -> u64 {
    2 * 3u64.pow(j) - 1
}

fn cube_ring_count(n: usize, j: u32) -> u64 {
    if j == 0 {
        return 1;
    }
    let e = cube_edge_cells(j);
    match n {
        2 => e * e - (e - 2) * (e - 2),
        _ => e * e * e - (e - 2) * (e - 2) * (e - 2),
    }
}

fn cube_layer_geometry(n: usize, j: u32) -> (f64, f64, f64, f64) {
    let t = 3f64.powi(j as i32).recip();
    let side = 0.5 * t;
    let delta = 0.25 * t;
    let d = (n as f64).sqrt() * side;
    let outer_half_side = 0.5 - 0.25 * t;
    (side, delta, d, outer_half_side)
}

fn cube_set_at(n: usize, j: u32, cell: [u32; 3]) -> SubdivisionSet {
    let (side, delta, d, r_j) = cube_layer_geometry(n, j);
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    let mut center = [0.0; MAX_DIM];
    for a in 0..n {
        lo[a] = 0.5 - r_j + cell[a] as f64 * side;
        hi[a] = lo[a] + side;
        center[a] = lo[a] + 0.5 * side;
    }
    SubdivisionSet {
        id: 0,
        family: FamilyTag::Cube { n, j, cell },
        layer: j,
        bbox: AlignedBox { lo, hi, dim: n },
        star_center: Point::from_slice(&center[..n]).expect("valid dim"),
        d,
        d_x: None,
        d_r: None,
        delta,
        measure_ub: None,
        neighbors: Vec::new(),
    }
}

/// Generate layers 0..=j_max of the unit-cube subdivision with explicit cell
/// enumeration (planar and spatial only).
pub fn cube_subdivision(n: usize, j_max: u32) -> Result<CubeSubdivision> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParam(format!("cube subdivision needs n in {{2,3}}, got {n}")));
    }
    let total: u64 = (0..=j_max).map(|j| cube_ring_count(n, j)).sum();
    if total > MAX_ENUMERATED_SETS {
        return Err(Error::InvalidParam(format!(
            "enumeration of {total} cells exceeds the cap of {MAX_ENUMERATED_SETS}; lower j_max"
        )));
    }
    let mut layers = Vec::new();
    let mut sets = Vec::new();
    let mut prev_covered = 0.0;
    for j in 0..=j_max {
        let (side, delta, d, r_j) = cube_layer_geometry(n, j);
        let e = cube_edge_cells(j);
        let covered = (2.0 * r_j).powi(n as i32);
        layers.push(CubeLayer {
            j,
            e_j: e,
            count: cube_ring_count(n, j),
            count_bound: 2f64.powi(n as i32) * n as f64 * 3f64.powi((j as i32) * (n as i32 - 1)),
            side,
            d,
            delta,
            measure: covered - prev_covered,
            measure_bound: n as f64 * 3f64.powi(-(j as i32)),
            outer_half_side: r_j,
        });
        prev_covered = covered;

        let em1 = e as u32 - 1;
        let is_ring = |c: &[u32]| j == 0 || c.iter().take(n).any(|&i| i == 0 || i == em1);
        if n == 2 {
            for ix in 0..e as u32 {
                for iy in 0..e as u32 {
                    if is_ring(&[ix, iy]) {
                        sets.push(cube_set_at(n, j, [ix, iy, 0]));
                    }
                }
            }
        } else {
            for ix in 0..e as u32 {
                for iy in 0..e as u32 {
                    for iz in 0..e as u32 {
                        if is_ring(&[ix, iy, iz]) {
                            sets.push(cube_set_at(n, j, [ix, iy, iz]));
                        }
                    }
                }
            }
        }
    }
    for (i, s) in sets.iter_mut().enumerate() {
        s.id = i as u64;
    }
    Ok(CubeSubdivision { n, layers, sets })
}

/// Layer and cell of the subdivision containing an interior point of the
/// unit cube (layer k holds points with sup-distance from the center in
/// (R_{k-1}, R_k]).
pub fn cube_locate(n: usize, z: &Point) -> Result<(u32, [u32; 3])> {
    let g = 0.5
        - (0..n)
            .map(|a| (z.raw()[a] - 0.5).abs())
            .fold(0.0f64, f64::max);
    if g <= 0.0 {
        return Err(Error::OutsideDomain(z.raw()[..n].to_vec()));
    }
    let mut j = 0u32;
    while 0.25 * 3f64.powi(j as i32).recip() > g {
        j += 1;
        if j > 60 {
            return Err(Error::InvalidParam("point too close to the boundary to locate".into()));
        }
    }
    let (side, _, _, r_j) = cube_layer_geometry(n, j);
    let e = cube_edge_cells(j) as i64;
    let mut cell = [0u32; 3];
    for a in 0..n {
        let ix = ((z.raw()[a] - (0.5 - r_j)) / side).floor() as i64;
        cell[a] = ix.clamp(0, e - 1) as u32;
    }
    Ok((j, cell))
}

/// Chain of subdivision sets from the set containing `z` inward to the
/// central cube, built by repeatedly stepping across the face that looks
/// toward the center (along the axis of largest center offset). Consecutive
/// sets share a face; the chain visits at most n sets per layer.
pub fn cube_chain(n: usize, z: &Point) -> Result<Vec<SubdivisionSet>> {
    let (mut j, mut cell) = cube_locate(n, z)?;
    let mut chain = vec![cube_set_at(n, j, cell)];
    let mut guard = 0;
    while j > 0 {
        let cur = chain.last().expect("nonempty");
        let q = &cur.star_center;
        let (axis, t) = (0..n)
            .map(|a| (a, q.raw()[a] - 0.5))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("n >= 2");
        let (side, ..) = cube_layer_geometry(n, j);
        // A point a quarter-cell beyond the inward face: strictly inside the
        // face-adjacent set (same layer near corners, next layer otherwise).
        let mut c = [0.0; MAX_DIM];
        c[..n].copy_from_slice(&q.raw()[..n]);
        c[axis] -= t.signum() * 0.75 * side;
        let p = Point::from_slice(&c[..n])?;
        let (nj, ncell) = cube_locate(n, &p)?;
        debug_assert!(nj == j || nj + 1 == j, "chain step must stay within one layer");
        j = nj;
        cell = ncell;
        chain.push(cube_set_at(n, j, cell));
        guard += 1;
        if guard > 64 * n as u32 {
            return Err(Error::InvalidParam("chain walk failed to reach the center".into()));
        }
    }
    for (i, s) in chain.iter_mut().enumerate() {
        s.id = i as u64;
    }
    Ok(chain)
}

// ---------------------------------------------------------------------------
// Chain bounds
// ---------------------------------------------------------------------------

/// A chain of sets with intersecting closures and its field upper bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainBound {
    pub ids: Vec<u64>,
    /// `2 * sum d(S)/delta(S)`; an upper bound on the field between points
    /// of the first and last sets.
    pub value: f64,
}

fn boxes_touch(a: &AlignedBox, b: &AlignedBox) -> bool {
    let tol = 1e-9 * a.min_side().min(b.min_side()).max(1e-300);
    (0..a.dim).all(|ax| a.lo[ax] <= b.hi[ax] + tol && b.lo[ax] <= a.hi[ax] + tol)
}

/// Evaluate the chain bound `2 * sum d/delta` over `chain` (indices into
/// `sets`), verifying that consecutive sets touch (adjacency is validated on
/// bounding extents, which is exact for cube cells and enclosing for cusp
/// sets whose shared curves reach their box faces).
pub fn chain_bound(sets: &[SubdivisionSet], chain: &[usize]) -> Result<ChainBound> {
    if chain.is_empty() {
        return Err(Error::InvalidParam("empty chain".into()));
    }
    for w in chain.windows(2) {
        let (a, b) = (&sets[w[0]], &sets[w[1]]);
        if !boxes_touch(&a.bbox, &b.bbox) {
            return Err(Error::InvalidParam(format!(
                "chain break: sets {} and {} are not adjacent",
                a.id, b.id
            )));
        }
    }
    let value = 2.0
        * chain
            .iter()
            .map(|&i| sets[i].d / sets[i].delta)
            .sum::<f64>();
    Ok(ChainBound { ids: chain.iter().map(|&i| sets[i].id).collect(), value })
}

/// Bound series for the unit cube: term_j = (4 sqrt n)^s (j+1)^s n 3^{-j},
/// the chain bound to layer j raised to the s-th power times the layer
/// measure bound. Converges for every s >= 0 (tail ratio tends to 1/3).
pub fn cube_bound_series(n: usize, s: f64, j_max: u32) -> Result<SeriesReport> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParam(format!("need s >= 0, got {s}")));
    }
    let m2 = 4.0 * (n as f64).sqrt();
    let terms: Vec<f64> = (0..=j_max)
        .map(|j| m2.powf(s) * ((j + 1) as f64).powf(s) * n as f64 * 3f64.powi(-(j as i32)))
        .collect();
    SeriesReport::classify(terms)
}

// ---------------------------------------------------------------------------
// Cusp subdivision
// ---------------------------------------------------------------------------

/// Number of binary digits of m: `floor(log2 m) + 1`.
pub fn binary_length(m: u64) -> u32 {
    64 - m.leading_zeros()
}

/// Radial fraction band of a cusp set with binary length `ell`:
/// `[1 - 2^{1-ell}, 1 - 2^{-ell}]`.
fn cusp_fraction_band(ell: u32) -> (f64, f64) {
    (1.0 - 2f64.powi(1 - ell as i32), 1.0 - 2f64.powi(-(ell as i32)))
}

/// Cosine factor of the boundary tangent at the steepest in-range point
/// (x = 1/2): `1 / sqrt(1 + alpha^2 4^{1-alpha})`.
pub fn cusp_c1(alpha: f64) -> f64 {
    (1.0 + alpha * alpha * 4f64.powf(1.0 - alpha)).sqrt().recip()
}

/// Constant of the distance lower bound `delta >= C(alpha) 2^{-(alpha j + ell)}`.
pub fn cusp_delta_constant(alpha: f64) -> f64 {
    cusp_c1(alpha) * 2f64.powf(-alpha)
}

/// Constant of the chain bound closed form (folds the per-leg constant, the
/// level-descent geometric sum, and the final leg through the wide piece).
pub fn cusp_k_constant(alpha: f64) -> f64 {
    6.0 / (cusp_delta_constant(alpha) * (1.0 - 2f64.powf(1.0 - alpha)))
        + 2f64.powf(alpha) / (8.0 * cusp_c1(alpha))
}

fn cusp_set_full(alpha: f64, n: usize, j: u32, m: u64, half: i8) -> Result<SubdivisionSet> {
    if m == 0 {
        return Err(Error::InvalidParam("cusp set index m starts at 1".into()));
    }
    if !(alpha > 1.0) || j == 0 {
        return Err(Error::InvalidParam(format!(
            "cusp sets need alpha > 1 and level j >= 1, got alpha={alpha}, j={j}"
        )));
    }
    let ell = binary_length(m);
    let w = 2f64.powi(-((j + ell) as i32));
    let (x0, x1) = (m as f64 * w, (m + 1) as f64 * w);
    let (f0, f1) = cusp_fraction_band(ell);
    let d_x = w;
    let d_r = x1.powf(alpha) * 2f64.powi(-(ell as i32));
    let delta = cusp_delta_constant(alpha) * 2f64.powf(-(alpha * j as f64 + ell as f64));
    let measure_ub = 2f64.powf(-(j as f64) * (alpha * (n as f64 - 1.0) + 1.0))
        * 2f64.powi(-2 * ell as i32);

    let x_mid = 0.5 * (x0 + x1);
    let f_mid = 0.5 * (f0 + f1);
    let (r_lo, r_hi) = (f0 * x0.powf(alpha), f1 * x1.powf(alpha));
    let (bbox, star) = if n == 2 {
        match half {
            0 => (
                AlignedBox::new2(x0, -r_hi, x1, r_hi),
                Point::new2(x_mid, if m == 1 { 0.0 } else { f_mid * x_mid.powf(alpha) }),
            ),
            1 => (
                AlignedBox::new2(x0, r_lo, x1, r_hi),
                Point::new2(x_mid, f_mid * x_mid.powf(alpha)),
            ),
            _ => (
                AlignedBox::new2(x0, -r_hi, x1, -r_lo),
                Point::new2(x_mid, -f_mid * x_mid.powf(alpha)),
            ),
        }
    } else {
        (
            AlignedBox::new3(x0, -r_hi, -r_hi, x1, r_hi, r_hi),
            Point::new3(x_mid, if m == 1 { 0.0 } else { f_mid * x_mid.powf(alpha) }, 0.0),
        )
    };
    Ok(SubdivisionSet {
        id: 0,
        family: FamilyTag::CuspSet { alpha, n, j, m, ell, half },
        layer: j,
        bbox,
        star_center: star,
        d: d_x + d_r,
        d_x: Some(d_x),
        d_r: Some(d_r),
        delta,
        measure_ub: Some(measure_ub),
        neighbors: Vec::new(),
    })
}

/// The planar cusp set at level j with binary index m (the upper mirror half
/// for m >= 2; the m = 1 set spans the axis and is whole).
pub fn cusp_set(alpha: f64, j: u32, m: u64) -> Result<SubdivisionSet> {
    cusp_set_full(alpha, 2, j, m, if m == 1 { 0 } else { 1 })
}

/// All cusp sets with levels 1..=j_max and indices 1..=m_max. Planar sets
/// with m >= 2 come as mirror pairs; spatial sets are whole rings.
pub fn cusp_family(alpha: f64, n: usize, j_max: u32, m_max: u64) -> Result<Vec<SubdivisionSet>> {
    let mut sets = Vec::new();
    for j in 1..=j_max {
        for m in 1..=m_max {
            if n == 2 && m >= 2 {
                sets.push(cusp_set_full(alpha, n, j, m, 1)?);
                sets.push(cusp_set_full(alpha, n, j, m, -1)?);
            } else {
                sets.push(cusp_set_full(alpha, n, j, m, 0)?);
            }
        }
    }
    for (i, s) in sets.iter_mut().enumerate() {
        s.id = i as u64;
    }
    Ok(sets)
}

/// Binary truncation list of m: repeatedly drop the rightmost binary digit,
/// inclusive of m, ending at 1. Its length is `floor(log2 m) + 1`.
pub fn lambda_chain(m: u64) -> Result<Vec<u64>> {
    if m == 0 {
        return Err(Error::InvalidParam("binary truncation starts at m >= 1".into()));
    }
    let mut out = vec![m];
    let mut cur = m;
    while cur > 1 {
        cur >>= 1;
        out.push(cur);
    }
    Ok(out)
}

/// Chain from the cusp set (j, m) inward: the binary-truncation walk at
/// level j followed by the center (m = 1) sets of levels j-1 down to 1.
pub fn cusp_chain(alpha: f64, j: u32, m: u64) -> Result<Vec<SubdivisionSet>> {
    let mut chain = Vec::new();
    for m_step in lambda_chain(m)? {
        chain.push(cusp_set(alpha, j, m_step)?);
    }
    for j_step in (1..j).rev() {
        chain.push(cusp_set(alpha, j_step, 1)?);
    }
    for (i, s) in chain.iter_mut().enumerate() {
        s.id = i as u64;
    }
    Ok(chain)
}

/// Closed-form upper bound on the field between the star center of cusp set
/// (j, m) and the wide end: `C_k(alpha) (1 + ell) 2^{(alpha-1) j}`.
pub fn cusp_k_bound(alpha: f64, j: u32, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParam("cusp set index m starts at 1".into()));
    }
    let ell = binary_length(m);
    Ok(cusp_k_constant(alpha) * (1.0 + ell as f64) * 2f64.powf((alpha - 1.0) * j as f64))
}

/// Index sum of the cusp upper series at exponent s:
/// `sum_m (1 + ell(m))^s 2^{-2 ell(m)}` over m = 1..=m_max.
pub fn cusp_m_sum(s: f64, m_max: u64) -> f64 {
    (1..=m_max)
        .map(|m| {
            let ell = binary_length(m);
            (1.0 + ell as f64).powf(s) * 2f64.powi(-2 * ell as i32)
        })
        .sum()
}

/// Upper-bound series for the cusp with both decision inequalities recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspUpperReport {
    pub series: SeriesReport,
    /// Level-term exponent E with term_j proportional to 2^{jE}:
    /// `E = (alpha - 1) s - (alpha (n - 1) + 1)`.
    pub series_exponent: f64,
    /// `(alpha - 1) s - (alpha (n - 1) + 1) < 0`, the convergence condition
    /// in the form the series calculation produces it.
    pub exponent_condition_holds: bool,
    /// `(alpha - 1)(s - n + 1) < n`, the same threshold in the form the
    /// averaging classification states it. Recorded independently; the two
    /// inequalities are not reconciled here.
    pub threshold_condition_holds: bool,
    pub m_sum: f64,
    pub c_k: f64,
}

/// Sum the double series `kBound(j,m)^s * measure_ub(j,m)` over m then j:
/// term_j = C_k^s * (sum over m) * 2^{jE}. The verdict comes from the sign
/// of E (the tail is exactly geometric, so the tabulated ratios agree).
pub fn cusp_upper_series(
    alpha: f64,
    n: usize,
    s: f64,
    j_max: u32,
    m_max: u64,
) -> Result<CuspUpperReport> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParam(format!("need alpha > 1, got {alpha}")));
    }
    let e = (alpha - 1.0) * s - (alpha * (n as f64 - 1.0) + 1.0);
    let c_k = cusp_k_constant(alpha);
    let m_sum = cusp_m_sum(s, m_max);
    let prefactor = c_k.powf(s) * m_sum;
    let terms: Vec<f64> = (1..=j_max)
        .map(|j| prefactor * 2f64.powf(j as f64 * e))
        .collect();
    let verdict = if e < 0.0 { SeriesVerdict::Converges } else { SeriesVerdict::Diverges };
    Ok(CuspUpperReport {
        series: SeriesReport::tabulate(terms, verdict)?,
        series_exponent: e,
        exponent_condition_holds: e < 0.0,
        threshold_condition_holds: (alpha - 1.0) * (s - n as f64 + 1.0) < n as f64,
        m_sum,
        c_k,
    })
}

// ---------------------------------------------------------------------------
// Block tower (combinatorial)
// ---------------------------------------------------------------------------

/// Size data of block m: edge = 3^{-floor(log2 m)}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub size_exponent: u32,
    pub edge: f64,
}

pub fn block_counts(m: u64) -> Result<BlockCounts> {
    if m == 0 {
        return Err(Error::InvalidParam("blocks are numbered from 1".into()));
    }
    let size_exponent = binary_length(m) - 1;
    Ok(BlockCounts { size_exponent, edge: 3f64.powi(-(size_exponent as i32)) })
}

/// Upper-bound series for the block tower.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockUpperReport {
    pub series: SeriesReport,
    /// Index exponent of the per-block terms, `s - n log2 3`.
    pub exponent: f64,
    /// Critical exponent: converges iff `s < n log2 3 - 1`.
    pub critical_s: f64,
}

/// Per-block terms `sum_i (i + 1 + 3m)^s m^{-n log2 3} 3^{-i}`, classified by
/// the index-series criterion (converges iff s < n log2 3 - 1; the per-term
/// ratios tend to 1, so the ratio heuristic cannot decide and is kept only
/// as tabulated data).
pub fn block_upper_series(n: usize, s: f64, m_max: u64, i_max: u32) -> Result<BlockUpperReport> {
    if !(s >= 1.0) {
        return Err(Error::InvalidParam(format!("need s >= 1, got {s}")));
    }
    let log2_3 = 3f64.log2();
    let critical_s = n as f64 * log2_3 - 1.0;
    let terms: Vec<f64> = (1..=m_max)
        .map(|m| {
            let mf = m as f64;
            let inner: f64 = (0..=i_max)
                .map(|i| (i as f64 + 1.0 + 3.0 * mf).powf(s) * 3f64.powi(-(i as i32)))
                .sum();
            mf.powf(-(n as f64) * log2_3) * inner
        })
        .collect();
    let verdict = if s < critical_s { SeriesVerdict::Converges } else { SeriesVerdict::Diverges };
    Ok(BlockUpperReport {
        series: SeriesReport::tabulate(terms, verdict)?,
        exponent: s - n as f64 * log2_3,
        critical_s,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_sets: usize,
    /// Pairs whose interiors overlap (exact for cube cells, sampled otherwise).
    pub overlap_pairs: Vec<(u64, u64)>,
    /// Fraction of in-domain raster cells (outside the excluded wide piece)
    /// covered by some set.
    pub covered_fraction: f64,
    pub connected: bool,
    pub n_components: usize,
    pub star_violations: Vec<u64>,
    /// Sets whose star-shapedness could not be sampled (spatial rings).
    pub star_checks_skipped: usize,
    pub notes: Vec<String>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Check the subdivision axioms on a finite truncation against a raster of
/// the domain: zero interior overlap, coverage of the raster volume (outside
/// an optional excluded wide piece), adjacency-graph connectivity, and
/// star-shapedness spot checks.
pub fn validate_subdivision(
    sets: &[SubdivisionSet],
    raster: &RasterDomain,
    exclude: Option<&StageRegion>,
    seed: u64,
) -> ValidationReport {
    let mut notes = Vec::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    // Pairwise interior overlap + adjacency graph, pruned by a sweep over
    // x-sorted boxes.
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by(|&a, &b| sets[a].bbox.lo[0].total_cmp(&sets[b].bbox.lo[0]));
    let mut overlap_pairs = Vec::new();
    let mut dsu = Dsu::new(sets.len());
    for (pos, &i) in order.iter().enumerate() {
        for &k in order[pos + 1..].iter() {
            if sets[k].bbox.lo[0] > sets[i].bbox.hi[0] + 1e-12 {
                break;
            }
            if !boxes_touch(&sets[i].bbox, &sets[k].bbox) {
                continue;
            }
            dsu.union(i, k);
            let (a, b) = (&sets[i], &sets[k]);
            let both_cells = matches!(
                (&a.family, &b.family),
                (FamilyTag::Cube { .. }, FamilyTag::Cube { .. })
            );
            let overlapping = if both_cells {
                (0..raster.grid.n).all(|ax| {
                    a.bbox.lo[ax].max(b.bbox.lo[ax]) + 1e-9 * a.bbox.min_side()
                        < a.bbox.hi[ax].min(b.bbox.hi[ax])
                })
            } else {
                let n = raster.grid.n;
                let mut hit = false;
                for _ in 0..64 {
                    let mut c = [0.0; MAX_DIM];
                    for ax in 0..n {
                        let (lo, hi) = (
                            a.bbox.lo[ax].max(b.bbox.lo[ax]),
                            a.bbox.hi[ax].min(b.bbox.hi[ax]),
                        );
                        if lo >= hi {
                            c[ax] = lo;
                        } else {
                            c[ax] = rng.random_range(lo..hi);
                        }
                    }
                    let p = Point::from_slice(&c[..n]).expect("valid dim");
                    if a.contains_interior(&p) && b.contains_interior(&p) {
                        hit = true;
                        break;
                    }
                }
                hit
            };
            if overlapping {
                overlap_pairs.push((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    let mut roots: Vec<usize> = (0..sets.len()).map(|i| dsu.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    let n_components = roots.len().max(usize::from(sets.is_empty()));

    // Coverage of raster cells outside the excluded region.
    let grid = &raster.grid;
    let cells: Vec<usize> = (0..raster.inside.len()).filter(|&i| raster.inside[i]).collect();
    let counted: Vec<(bool, bool)> = cells
        .par_iter()
        .map(|&i| {
            let p = grid.center(grid.cell(i));
            if exclude.map(|r| r.contains(&p)).unwrap_or(false) {
                return (false, false);
            }
            (true, sets.iter().any(|s| s.contains(&p)))
        })
        .collect();
    let denom = counted.iter().filter(|c| c.0).count();
    let covered = counted.iter().filter(|c| c.0 && c.1).count();
    let covered_fraction = if denom == 0 { 1.0 } else { covered as f64 / denom as f64 };
    if exclude.is_some() {
        notes.push("wide central piece excluded from coverage accounting".into());
    }

    // Star-shapedness spot checks.
    let mut star_violations = Vec::new();
    let mut star_checks_skipped = 0;
    for s in sets {
        let spatial_ring = matches!(s.family, FamilyTag::CuspSet { n: 3, .. });
        if spatial_ring {
            star_checks_skipped += 1;
            continue;
        }
        let n = s.star_center.dim();
        let mut violated = false;
        let mut found = 0;
        for _ in 0..400 {
            if found >= 8 || violated {
                break;
            }
            let mut c = [0.0; MAX_DIM];
            for ax in 0..n {
                c[ax] = rng.random_range(s.bbox.lo[ax]..s.bbox.hi[ax].max(s.bbox.lo[ax] + 1e-300));
            }
            let p = Point::from_slice(&c[..n]).expect("valid dim");
            if !s.contains(&p) {
                continue;
            }
            found += 1;
            for step in 1..32 {
                let t = step as f64 / 32.0;
                let q = Point::from_slice(
                    &(0..n)
                        .map(|ax| s.star_center.raw()[ax] * (1.0 - t) + p.raw()[ax] * t)
                        .collect::<Vec<_>>(),
                )
                .expect("valid dim");
                if !s.contains(&q) {
                    violated = true;
                    break;
                }
            }
        }
        if violated {
            star_violations.push(s.id);
        }
    }
    if star_checks_skipped > 0 {
        notes.push(format!(
            "{star_checks_skipped} spatial ring sets kept whole; star-shapedness not sampled for them"
        ));
    }

    ValidationReport {
        n_sets: sets.len(),
        overlap_pairs,
        covered_fraction,
        connected: n_components <= 1,
        n_components,
        star_violations,
        star_checks_skipped,
        notes,
    }
}
