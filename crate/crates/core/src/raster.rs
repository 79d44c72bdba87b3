//! Rasterization of domains onto uniform grids.
//!
//! A domain is sampled at cell centers of an `h`-lattice-aligned grid with a
//! two-cell padding ring, so identical bounding boxes at the same `h` always
//! produce identical grids (required when comparing fields across domains).
//! Each inside cell carries the Euclidean distance to the nearest *outside*
//! cell center, computed by an exact separable distance transform and clamped
//! by a closed-form bound where the shape provides one. Both quantities bound
//! the true boundary distance from above, with error O(h).

use crate::error::{Error, Result};
use crate::geom::{AlignedBox, DomainSpec, Point, TruncationNote, MAX_DIM};
use serde::{Deserialize, Serialize};

/// Number of padding cells added around the requested box on every side.
pub const PAD_CELLS: i64 = 2;

/// Uniform grid over an axis-aligned region. Cell `(i, j, k)` has its center
/// at `origin + (index + 1/2) h` per axis; `dims[2] == 1` in the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub origin: [f64; MAX_DIM],
    pub dims: [usize; MAX_DIM],
}

impl Grid {
    /// Grid covering `bbox` at pitch `h`, with the origin snapped to the
    /// `h`-lattice and `PAD_CELLS` extra cells on each side.
    pub fn covering(bbox: &AlignedBox, h: f64, n: usize) -> Result<Grid> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParam(format!("grid pitch must be positive, got {h}")));
        }
        let mut origin = [0.0; MAX_DIM];
        let mut dims = [1; MAX_DIM];
        for a in 0..n {
            let i_lo = (bbox.lo[a] / h).floor() as i64 - PAD_CELLS;
            let i_hi = (bbox.hi[a] / h).ceil() as i64 + PAD_CELLS;
            origin[a] = i_lo as f64 * h;
            dims[a] = (i_hi - i_lo).max(1) as usize;
        }
        Ok(Grid { n, h, origin, dims })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, c: [usize; MAX_DIM]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> [usize; MAX_DIM] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn center(&self, c: [usize; MAX_DIM]) -> Point {
        let coord = |a: usize| self.origin[a] + (c[a] as f64 + 0.5) * self.h;
        if self.n == 2 {
            Point::new2(coord(0), coord(1))
        } else {
            Point::new3(coord(0), coord(1), coord(2))
        }
    }

    /// Cell whose closed region contains `p`, if inside the grid extent.
    pub fn cell_containing(&self, p: &Point) -> Option<[usize; MAX_DIM]> {
        let mut c = [0usize; MAX_DIM];
        for a in 0..self.n {
            let t = (p.raw()[a] - self.origin[a]) / self.h;
            if t < 0.0 || t >= self.dims[a] as f64 {
                return None;
            }
            c[a] = t as usize;
        }
        Some(c)
    }

    /// Cell volume h^n.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn same_frame(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.h == other.h
            && self.origin == other.origin
            && self.dims == other.dims
    }
}

/// A rasterized domain: inside mask plus per-cell boundary distance.
#[derive(Clone, Debug)]
pub struct RasterDomain {
    pub grid: Grid,
    /// Cell-center membership in the (possibly truncated) domain.
    pub inside: Vec<bool>,
    /// For inside cells: distance to the nearest outside cell center, clamped
    /// by the shape's closed-form bound when available. Zero outside.
    pub dist: Vec<f64>,
    /// Spec as requested, before the feature-resolution policy.
    pub requested_spec: DomainSpec,
    /// Spec actually rasterized after the feature-resolution policy.
    pub effective_spec: DomainSpec,
    /// What the policy removed, with a measure bound.
    pub truncation: TruncationNote,
}

impl RasterDomain {
    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Measure estimate: inside cells times cell volume.
    pub fn volume_estimate(&self) -> f64 {
        self.inside_count() as f64 * self.grid.cell_volume()
    }

    /// Nearest inside cell to `p`; see [`nearest_inside`].
    pub fn nearest_inside_cell(&self, p: &Point) -> Result<[usize; MAX_DIM]> {
        nearest_inside(&self.grid, &self.inside, p)
    }
}

/// Nearest cell with `inside == true` to `p` (Euclidean distance between `p`
/// and cell centers; ties broken by smaller linear index). Errors if the mask
/// has no inside cells.
pub fn nearest_inside(grid: &Grid, inside: &[bool], p: &Point) -> Result<[usize; MAX_DIM]> {
    if p.dim() != grid.n {
        return Err(Error::DimensionMismatch { expected: grid.n, got: p.dim() });
    }
    // Start from the containing cell (clamped into the grid) and scan outward
    // in box rings; once a candidate is found, only rings whose nearest cells
    // could still beat it need checking.
    let mut seed = [0usize; MAX_DIM];
    for a in 0..grid.n {
        let t = ((p.raw()[a] - grid.origin[a]) / grid.h).floor();
        seed[a] = t.clamp(0.0, (grid.dims[a] - 1) as f64) as usize;
    }
    let mut best: Option<(f64, usize)> = None;
    let max_ring = (0..grid.n).map(|a| grid.dims[a]).max().unwrap_or(1);
    for ring in 0..=max_ring {
        if let Some((bd, _)) = best {
            // All cells in this ring are at least (ring-1)*h away from p.
            if (ring as f64 - 1.0) * grid.h > bd {
                break;
            }
        }
        let mut visit = |c: [usize; MAX_DIM]| {
            let i = grid.idx(c);
            if inside[i] {
                let d = grid.center(c).dist(p);
                let cand = (d, i);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
        };
        for_ring(grid, seed, ring, &mut visit);
    }
    match best {
        Some((_, i)) => Ok(grid.cell(i)),
        None => Err(Error::EmptyRaster),
    }
}

/// Visit all grid cells with Chebyshev distance exactly `ring` from seed.
fn for_ring(
    g: &Grid,
    seed: [usize; MAX_DIM],
    ring: usize,
    visit: &mut impl FnMut([usize; MAX_DIM]),
) {
    let r = ring as i64;
    let lo: [i64; MAX_DIM] = std::array::from_fn(|a| seed[a] as i64 - r);
    let hi: [i64; MAX_DIM] =
        std::array::from_fn(|a| if a < g.n { seed[a] as i64 + r } else { 0 });
    for z in lo[2].max(0)..=hi[2].min(g.dims[2] as i64 - 1) {
        for y in lo[1].max(0)..=hi[1].min(g.dims[1] as i64 - 1) {
            for x in lo[0].max(0)..=hi[0].min(g.dims[0] as i64 - 1) {
                let cheb = (x - seed[0] as i64)
                    .abs()
                    .max((y - seed[1] as i64).abs())
                    .max((z - seed[2] as i64).abs());
                if cheb == r {
                    visit([x as usize, y as usize, z as usize]);
                }
            }
        }
    }
}

/// Rasterize a domain at pitch `h` over its own bounding box.
pub fn rasterize(spec: &DomainSpec, h: f64) -> Result<RasterDomain> {
    let bbox = spec.bounding_box();
    rasterize_in_box(spec, h, &bbox)
}

/// Rasterize a domain at pitch `h` over a caller-supplied box (plus padding).
/// The box must contain the domain; this is what keeps several domains on an
/// identical grid frame for cell-by-cell comparisons.
pub fn rasterize_in_box(spec: &DomainSpec, h: f64, bbox: &AlignedBox) -> Result<RasterDomain> {
    spec.validate()?;
    let own = spec.bounding_box();
    for a in 0..spec.dim() {
        if own.lo[a] < bbox.lo[a] - 1e-12 || own.hi[a] > bbox.hi[a] + 1e-12 {
            return Err(Error::GridMismatch(format!(
                "supplied box does not contain the domain on axis {a}"
            )));
        }
    }
    let (effective_spec, truncation) = spec.truncated(h);
    let grid = Grid::covering(bbox, h, spec.dim())?;
    let compiled = effective_spec.compile();

    let mut inside = vec![false; grid.len()];
    for i in 0..grid.len() {
        inside[i] = compiled.contains(&grid.center(grid.cell(i)));
    }
    if !inside.iter().any(|&b| b) {
        return Err(Error::EmptyRaster);
    }

    let edt2 = edt_sq(&inside, grid.dims);
    let mut dist = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if inside[i] {
            let mut d = grid.h * edt2[i].sqrt();
            if let Some(bound) = compiled.analytic_dist_bound(&grid.center(grid.cell(i))) {
                d = d.min(bound);
            }
            debug_assert!(d > 0.0, "inside cell with nonpositive distance");
            dist[i] = d;
        }
    }

    Ok(RasterDomain {
        grid,
        inside,
        dist,
        requested_spec: spec.clone(),
        effective_spec,
        truncation,
    })
}

/// Exact squared Euclidean distance (in cell units) from every cell center to
/// the nearest cell center with `inside == false`. Separable two-pass scheme:
/// a linear scan along x, then exact 1-D parabola envelopes along y and z.
pub fn edt_sq(inside: &[bool], dims: [usize; MAX_DIM]) -> Vec<f64> {
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
    let mut g = vec![f64::INFINITY; inside.len()];

    // Pass 1: distance along x to the nearest outside cell in the same row.
    for z in 0..nz {
        for y in 0..ny {
            let row = (z * ny + y) * nx;
            let mut d = f64::INFINITY;
            for x in 0..nx {
                d = if inside[row + x] { d + 1.0 } else { 0.0 };
                g[row + x] = d;
            }
            d = f64::INFINITY;
            for x in (0..nx).rev() {
                d = if inside[row + x] { d + 1.0 } else { 0.0 };
                if d < g[row + x] {
                    g[row + x] = d;
                }
            }
            for x in 0..nx {
                let v = g[row + x];
                g[row + x] = v * v;
            }
        }
    }

    // Passes 2 and 3: exact 1-D squared-distance transform along y, then z.
    let mut f = vec![0.0; ny.max(nz)];
    let mut out = vec![0.0; ny.max(nz)];
    let mut v = vec![0usize; ny.max(nz)];
    let mut zenv = vec![0.0; ny.max(nz) + 1];
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                f[y] = g[(z * ny + y) * nx + x];
            }
            dt1d(&f[..ny], &mut out[..ny], &mut v, &mut zenv);
            for y in 0..ny {
                g[(z * ny + y) * nx + x] = out[y];
            }
        }
    }
    if nz > 1 {
        for y in 0..ny {
            for x in 0..nx {
                for z in 0..nz {
                    f[z] = g[(z * ny + y) * nx + x];
                }
                dt1d(&f[..nz], &mut out[..nz], &mut v, &mut zenv);
                for z in 0..nz {
                    g[(z * ny + y) * nx + x] = out[z];
                }
            }
        }
    }
    g
}

/// Exact 1-D squared distance transform under the squared-Euclidean cost:
/// `out[q] = min_p (q - p)^2 + f[p]` via the lower envelope of parabolas.
/// Entries with `f == INF` (rows that saw no site yet) contribute nothing.
fn dt1d(f: &[f64], out: &mut [f64], v: &mut [usize], zenv: &mut [f64]) {
    let n = f.len();
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => {
            out[..n].fill(f64::INFINITY);
            return;
        }
    };
    let mut k = 0usize;
    v[0] = first;
    zenv[0] = f64::NEG_INFINITY;
    zenv[1] = f64::INFINITY;
    let sect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in (first + 1)..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = sect(q, v[k]);
        while k > 0 && s <= zenv[k] {
            k -= 1;
            s = sect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        zenv[k] = s;
        zenv[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while zenv[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = d * d + f[v[k]];
    }
}
