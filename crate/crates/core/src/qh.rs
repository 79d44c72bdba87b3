//! Quasihyperbolic distance fields on rasterized domains.
//!
//! The field value at a cell is the length of the shortest path from the base
//! cell through inside cells, where a step from `p` to `q` costs
//! `|p - q| * (1/d(p) + 1/d(q)) / 2` — the trapezoid discretization of the
//! boundary-distance line integral. Paths use either the axis stencil (2n
//! neighbors) or the full stencil (3^n - 1 neighbors, the default).

use crate::error::{Error, Result};
use crate::geom::{Point, MAX_DIM};
use crate::raster::{Grid, RasterDomain};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

/// Neighborhood used by the grid graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// 2n axis neighbors.
    Axis,
    /// All 3^n - 1 neighbors (default).
    #[default]
    Full,
}

impl Stencil {
    /// Step offsets together with their Euclidean norms in cell units.
    pub fn offsets(&self, n: usize) -> Vec<([i64; MAX_DIM], f64)> {
        let span = |a: usize| if a < n { [-1i64, 0, 1].to_vec() } else { vec![0] };
        let mut out = Vec::new();
        for dz in span(2) {
            for dy in span(1) {
                for dx in span(0) {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    if *self == Stencil::Axis && dx.abs() + dy.abs() + dz.abs() != 1 {
                        continue;
                    }
                    let norm = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    out.push(([dx, dy, dz], norm));
                }
            }
        }
        out
    }
}

/// Min-heap entry ordered by (cost, cell index).
#[derive(Copy, Clone)]
struct HeapEntry {
    cost: f64,
    cell: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.cell == other.cell
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed so std's max-heap pops the smallest (cost, cell) first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

const NO_PRED: u32 = u32::MAX;

/// Shortest-path distance field from a base cell.
#[derive(Clone, Debug)]
pub struct QhField {
    pub grid: Grid,
    pub inside: Vec<bool>,
    /// Field values; `INFINITY` outside the domain and on inside cells not
    /// reachable from the base.
    pub k: Vec<f64>,
    /// Predecessor cell indices along shortest paths (`u32::MAX` = none).
    pred: Vec<u32>,
    pub base_cell: [usize; MAX_DIM],
    /// Base actually used (center of the snapped cell).
    pub base_center: Point,
    /// Base requested by the caller before snapping.
    pub base_requested: Point,
    pub stencil: Stencil,
    /// Inside cells that no path from the base reaches.
    pub n_unreachable: usize,
}

/// Solve the single-source shortest-path problem from the inside cell nearest
/// to `z0`.
pub fn solve(raster: &RasterDomain, z0: &Point, stencil: Stencil) -> Result<QhField> {
    let grid = raster.grid.clone();
    if grid.len() >= NO_PRED as usize {
        return Err(Error::InvalidParam(format!(
            "grid with {} cells exceeds the solver's index range",
            grid.len()
        )));
    }
    if !raster.requested_spec.contains(z0)? {
        return Err(Error::OutsideDomain(z0.coords().to_vec()));
    }
    if !raster.effective_spec.contains(z0)? {
        return Err(Error::TruncatedRegion {
            point: z0.coords().to_vec(),
            detail: format!(
                "the base point lies in a region dropped by feature truncation (dropped: {})",
                raster.truncation.dropped.join("; ")
            ),
        });
    }
    let base_cell = raster.nearest_inside_cell(z0)?;
    // A spec can survive truncation as a formula while a feature (a cusp tip,
    // say) is still unresolvable at this pitch. Catch that case by the snap
    // distance: an interior point of a resolved region always has an inside
    // cell center within a couple of cell diagonals.
    let base_center = grid.center(base_cell);
    let snap_tol = 2.0 * grid.h * (grid.n as f64).sqrt();
    if base_center.dist(z0) > snap_tol {
        return Err(Error::TruncatedRegion {
            point: z0.coords().to_vec(),
            detail: format!(
                "no raster cell resolves the base point at pitch h = {}: the nearest inside \
                 cell center is {:.3e} away (the feature holding the point is below grid \
                 resolution)",
                grid.h,
                base_center.dist(z0)
            ),
        });
    }
    let base_idx = grid.idx(base_cell);
    let offsets = stencil.offsets(grid.n);

    let inv_d: Vec<f64> = raster
        .dist
        .iter()
        .zip(&raster.inside)
        .map(|(&d, &ins)| if ins { 1.0 / d } else { 0.0 })
        .collect();

    let mut k = vec![f64::INFINITY; grid.len()];
    let mut pred = vec![NO_PRED; grid.len()];
    let mut done = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    k[base_idx] = 0.0;
    heap.push(HeapEntry { cost: 0.0, cell: base_idx });

    while let Some(HeapEntry { cost, cell }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        let c = grid.cell(cell);
        for &(off, norm) in &offsets {
            let mut nc = [0usize; MAX_DIM];
            let mut ok = true;
            for a in 0..MAX_DIM {
                let t = c[a] as i64 + off[a];
                if t < 0 || t >= grid.dims[a] as i64 {
                    ok = false;
                    break;
                }
                nc[a] = t as usize;
            }
            if !ok {
                continue;
            }
            let ni = grid.idx(nc);
            if !raster.inside[ni] || done[ni] {
                continue;
            }
            let w = grid.h * norm * 0.5 * (inv_d[cell] + inv_d[ni]);
            let nd = cost + w;
            if nd < k[ni] || (nd == k[ni] && (cell as u32) < pred[ni]) {
                k[ni] = nd;
                pred[ni] = cell as u32;
                heap.push(HeapEntry { cost: nd, cell: ni });
            }
        }
    }

    let n_unreachable = (0..grid.len())
        .filter(|&i| raster.inside[i] && !k[i].is_finite())
        .count();

    Ok(QhField {
        base_center: grid.center(base_cell),
        base_requested: *z0,
        base_cell,
        grid,
        inside: raster.inside.clone(),
        k,
        pred,
        stencil,
        n_unreachable,
    })
}

/// Connected-component labels of inside cells under a stencil; `u32::MAX`
/// marks outside cells. Returns (labels, component count).
pub fn components(grid: &Grid, inside: &[bool], stencil: Stencil) -> (Vec<u32>, u32) {
    let offsets = stencil.offsets(grid.n);
    let mut label = vec![u32::MAX; grid.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if !inside[start] || label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            let c = grid.cell(cell);
            for &(off, _) in &offsets {
                let mut nc = [0usize; MAX_DIM];
                let mut ok = true;
                for a in 0..MAX_DIM {
                    let t = c[a] as i64 + off[a];
                    if t < 0 || t >= grid.dims[a] as i64 {
                        ok = false;
                        break;
                    }
                    nc[a] = t as usize;
                }
                if !ok {
                    continue;
                }
                let ni = grid.idx(nc);
                if inside[ni] && label[ni] == u32::MAX {
                    label[ni] = next;
                    stack.push(ni);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

impl QhField {
    /// Field value at the inside cell nearest to `p`.
    pub fn value_at(&self, p: &Point) -> Result<f64> {
        let cell = self.nearest_inside_cell(p)?;
        Ok(self.k[self.grid.idx(cell)])
    }

    fn nearest_inside_cell(&self, p: &Point) -> Result<[usize; MAX_DIM]> {
        crate::raster::nearest_inside(&self.grid, &self.inside, p)
    }

    /// Shortest path from the base to the inside cell nearest `p`, as cell
    /// centers (base first). Errors with component diagnostics if the target
    /// is not reachable.
    pub fn geodesic(&self, p: &Point) -> Result<Vec<Point>> {
        let target = self.nearest_inside_cell(p)?;
        let ti = self.grid.idx(target);
        if !self.k[ti].is_finite() {
            let (labels, _) = components(&self.grid, &self.inside, self.stencil);
            return Err(Error::Unreachable {
                cell: target[..self.grid.n].to_vec(),
                component: labels[ti],
                base_component: labels[self.grid.idx(self.base_cell)],
            });
        }
        let mut cells = vec![ti];
        let mut cur = ti;
        while cur != self.grid.idx(self.base_cell) {
            let p = self.pred[cur];
            debug_assert!(p != NO_PRED, "finite cell without predecessor");
            cur = p as usize;
            cells.push(cur);
        }
        cells.reverse();
        Ok(cells.iter().map(|&i| self.grid.center(self.grid.cell(i))).collect())
    }

    /// Values along the geodesic to `p` (same order as [`Self::geodesic`]).
    pub fn geodesic_values(&self, p: &Point) -> Result<Vec<f64>> {
        let target = self.nearest_inside_cell(p)?;
        let ti = self.grid.idx(target);
        if !self.k[ti].is_finite() {
            return Err(Error::InvalidParam("target not reachable".into()));
        }
        let mut vals = vec![self.k[ti]];
        let mut cur = ti;
        while cur != self.grid.idx(self.base_cell) {
            cur = self.pred[cur] as usize;
            vals.push(self.k[cur]);
        }
        vals.reverse();
        Ok(vals)
    }

    /// Number of inside cells.
    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Maximum finite field value.
    pub fn max_finite(&self) -> f64 {
        self.k
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Result of the domain-monotonicity comparison: enlarging the domain can
/// only shorten quasihyperbolic distances, so on the smaller domain's cells
/// `k_G <= k_D` up to discretization.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SubsetReport {
    pub tol: f64,
    /// Largest `k_G - k_D` over compared cells (negative when the field in
    /// the larger domain is strictly shorter everywhere).
    pub max_violation: f64,
    /// Cells where `k_G - k_D` exceeds `tol`.
    pub violations: usize,
    pub compared_cells: usize,
    /// Cells of the smaller domain skipped because either field is
    /// unreachable there.
    pub skipped_unreachable: usize,
    pub ok: bool,
}

/// Check `k_G <= k_D + tol` on every inside cell of the smaller domain `D`,
/// where `G` contains `D`. Both fields must live on the same grid frame and
/// share the base cell.
pub fn subset_monotonicity(
    field_g: &QhField,
    field_d: &QhField,
    tol: f64,
) -> Result<SubsetReport> {
    if !field_g.grid.same_frame(&field_d.grid) {
        return Err(Error::GridMismatch(
            "the two fields live on different grid frames".into(),
        ));
    }
    if field_g.base_cell != field_d.base_cell {
        return Err(Error::BaseMismatch(format!(
            "base cells {:?} and {:?} differ",
            &field_g.base_cell[..field_g.grid.n],
            &field_d.base_cell[..field_d.grid.n]
        )));
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut compared = 0usize;
    let mut skipped = 0usize;
    for i in 0..field_d.grid.len() {
        if !field_d.inside[i] {
            continue;
        }
        if !field_g.inside[i] {
            return Err(Error::InvalidParam(
                "the second field's domain is not contained in the first's on this grid".into(),
            ));
        }
        let (kg, kd) = (field_g.k[i], field_d.k[i]);
        if !kg.is_finite() || !kd.is_finite() {
            skipped += 1;
            continue;
        }
        compared += 1;
        let v = kg - kd;
        max_violation = max_violation.max(v);
        if v > tol {
            violations += 1;
        }
    }
    if compared == 0 {
        return Err(Error::EmptyRaster);
    }
    Ok(SubsetReport {
        tol,
        max_violation,
        violations,
        compared_cells: compared,
        skipped_unreachable: skipped,
        ok: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{AlignedBox, DomainSpec};
    use crate::raster::rasterize;

    /// In the square, along the midline toward a wall the boundary distance
    /// equals the distance to that wall, and the projection argument makes the
    /// straight segment a geodesic: k(center -> (3/4, 1/2)) = ln 2.
    #[test]
    fn square_midline_value_matches_log_oracle() {
        let spec = DomainSpec::UnitCube { n: 2 };
        let r = rasterize(&spec, 1.0 / 256.0).unwrap();
        let f = solve(&r, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        let k = f.value_at(&Point::new2(0.75, 0.5)).unwrap();
        let expect = 2.0f64.ln();
        assert!((k - expect).abs() < 0.015, "k = {k}, expected ~{expect}");

        // The square is symmetric in x and y; the two midline targets agree
        // almost exactly (tie-breaking may pick mirror-inequivalent paths).
        let ky = f.value_at(&Point::new2(0.5, 0.75)).unwrap();
        assert!((k - ky).abs() < 1e-12);
    }

    /// In the ball, radial segments are geodesics: k(0 -> z) = ln(1/(1-|z|)).
    #[test]
    fn ball_radial_value_matches_log_oracle() {
        let spec = DomainSpec::UnitBall { n: 2 };
        let r = rasterize(&spec, 1.0 / 256.0).unwrap();
        let f = solve(&r, &Point::new2(0.0, 0.0), Stencil::Full).unwrap();
        let k = f.value_at(&Point::new2(0.75, 0.0)).unwrap();
        let expect = 4.0f64.ln();
        assert!((k - expect).abs() < 0.03, "k = {k}, expected ~{expect}");
        // Off-axis radial target: same law in a direction the full stencil
        // cannot follow exactly.
        let z = Point::new2(0.75 * 0.6, 0.75 * 0.8);
        let kz = f.value_at(&z).unwrap();
        assert!((kz - expect).abs() < 0.08, "kz = {kz}, expected ~{expect}");
    }

    #[test]
    fn ball_3d_radial_value_matches_log_oracle() {
        let spec = DomainSpec::UnitBall { n: 3 };
        let r = rasterize(&spec, 1.0 / 32.0).unwrap();
        let f = solve(&r, &Point::new3(0.0, 0.0, 0.0), Stencil::Full).unwrap();
        let k = f.value_at(&Point::new3(0.75, 0.0, 0.0)).unwrap();
        let expect = 4.0f64.ln();
        assert!((k - expect).abs() < 0.1, "k = {k}, expected ~{expect}");
    }

    #[test]
    fn solve_rejects_base_points_off_the_domain() {
        // Strictly outside the cusp: rejected as outside.
        let spec = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        let r = rasterize(&spec, 1.0 / 64.0).unwrap();
        let outside = solve(&r, &Point::new2(0.75, 0.9), Stencil::Full);
        assert!(matches!(outside, Err(Error::OutsideDomain(_))), "{outside:?}");

        // Inside the cusp formula but deep in the tip, far below what the
        // pitch resolves: rejected with an explanation, not silently snapped
        // to a faraway cell.
        let tip = Point::new2(0.01, 0.0);
        assert!(r.requested_spec.contains(&tip).unwrap());
        let unresolved = solve(&r, &tip, Stencil::Full);
        match unresolved {
            Err(Error::TruncatedRegion { detail, .. }) => {
                assert!(detail.contains("resolution") || detail.contains("truncation"), "{detail}");
            }
            other => panic!("expected truncation rejection, got {other:?}"),
        }

        // A room whose index exceeds the pitch's resolvable depth is dropped
        // from the effective spec entirely.
        let rooms = DomainSpec::RoomsAndHalls { j_max: 8 };
        let rr = rasterize(&rooms, 1.0 / 64.0).unwrap();
        let far_room = Point::new2(0.98, 0.5);
        assert!(rr.requested_spec.contains(&far_room).unwrap());
        if !rr.effective_spec.contains(&far_room).unwrap() {
            let dropped = solve(&rr, &far_room, Stencil::Full);
            assert!(
                matches!(dropped, Err(Error::TruncatedRegion { .. })),
                "{dropped:?}"
            );
        }
    }

    #[test]
    fn subset_monotonicity_holds_for_nested_boxes() {
        use crate::raster::rasterize_in_box;
        let h = 1.0 / 128.0;
        let big = DomainSpec::BoxUnion {
            n: 2,
            boxes: vec![AlignedBox::new2(0.0, 0.0, 2.0, 1.0)],
        };
        let small = DomainSpec::BoxUnion {
            n: 2,
            boxes: vec![AlignedBox::new2(0.0, 0.0, 1.0, 1.0)],
        };
        let frame = big.bounding_box();
        let rg = rasterize_in_box(&big, h, &frame).unwrap();
        let rd = rasterize_in_box(&small, h, &frame).unwrap();
        let z0 = Point::new2(0.5, 0.5);
        let fg = solve(&rg, &z0, Stencil::Full).unwrap();
        let fd = solve(&rd, &z0, Stencil::Full).unwrap();

        let max_inv_d = (0..rd.grid.len())
            .filter(|&i| rd.inside[i])
            .map(|i| 1.0 / rd.dist[i])
            .fold(0.0f64, f64::max);
        let tol = 5.0 * h * max_inv_d;
        let rep = subset_monotonicity(&fg, &fd, tol).unwrap();
        assert!(rep.ok, "violations: {} (max {})", rep.violations, rep.max_violation);
        assert!(rep.compared_cells > 10_000);

        // Identical domains compare exactly.
        let same = subset_monotonicity(&fd, &fd, 0.0).unwrap();
        assert!(same.ok);
        assert_eq!(same.max_violation, 0.0);

        // Non-nested domains are rejected, as are mismatched bases.
        assert!(subset_monotonicity(&fd, &fg, tol).is_err());
        let fg_shifted = solve(&rg, &Point::new2(1.5, 0.5), Stencil::Full).unwrap();
        assert!(matches!(
            subset_monotonicity(&fg_shifted, &fd, tol),
            Err(Error::BaseMismatch(_))
        ));
    }

    #[test]
    fn field_is_symmetric_in_base_and_target() {
        let spec = DomainSpec::UnitBall { n: 2 };
        let r = rasterize(&spec, 1.0 / 64.0).unwrap();
        let a = Point::new2(0.3, -0.2);
        let b = Point::new2(-0.5, 0.4);
        let fa = solve(&r, &a, Stencil::Full).unwrap();
        let fb = solve(&r, &b, Stencil::Full).unwrap();
        let kab = fa.value_at(&b).unwrap();
        let kba = fb.value_at(&a).unwrap();
        assert!((kab - kba).abs() < 1e-9, "{kab} vs {kba}");
    }

    #[test]
    fn full_stencil_never_exceeds_axis_stencil() {
        let spec = DomainSpec::UnitCube { n: 2 };
        let r = rasterize(&spec, 1.0 / 64.0).unwrap();
        let base = Point::new2(0.5, 0.5);
        let full = solve(&r, &base, Stencil::Full).unwrap();
        let axis = solve(&r, &base, Stencil::Axis).unwrap();
        for i in 0..r.grid.len() {
            if r.inside[i] {
                assert!(
                    full.k[i] <= axis.k[i] * (1.0 + 1e-12),
                    "full {} > axis {} at {i}",
                    full.k[i],
                    axis.k[i]
                );
            }
        }
    }

    #[test]
    fn triangle_inequality_between_bases() {
        let spec = DomainSpec::UnitBall { n: 2 };
        let r = rasterize(&spec, 1.0 / 64.0).unwrap();
        let pts = [
            Point::new2(0.0, 0.0),
            Point::new2(0.5, 0.1),
            Point::new2(-0.3, -0.6),
        ];
        let fields: Vec<QhField> = pts
            .iter()
            .map(|p| solve(&r, p, Stencil::Full).unwrap())
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let direct = fields[i].value_at(&pts[j]).unwrap();
                    let via = fields[i].value_at(&pts[l]).unwrap()
                        + fields[l].value_at(&pts[j]).unwrap();
                    assert!(direct <= via + 1e-9, "({i},{j},{l}): {direct} > {via}");
                }
            }
        }
    }

    #[test]
    fn geodesic_resums_to_the_field_value_exactly() {
        let spec = DomainSpec::UnitBall { n: 2 };
        let r = rasterize(&spec, 1.0 / 64.0).unwrap();
        let f = solve(&r, &Point::new2(0.0, 0.0), Stencil::Full).unwrap();
        let target = Point::new2(-0.7, 0.55);
        let path = f.geodesic(&target).unwrap();
        assert_eq!(path[0], f.base_center);

        // Re-accumulate edge weights in relaxation order: must be bit-equal.
        let inv_d: Vec<f64> = r
            .dist
            .iter()
            .zip(&r.inside)
            .map(|(&d, &ins)| if ins { 1.0 / d } else { 0.0 })
            .collect();
        let mut acc = 0.0f64;
        for w in path.windows(2) {
            let (p, q) = (w[0], w[1]);
            let ci = r.grid.cell_containing(&p).unwrap();
            let cj = r.grid.cell_containing(&q).unwrap();
            let norm = p.dist(&q) / r.grid.h;
            // Path steps are single stencil moves.
            assert!(norm < 1.5);
            acc += r.grid.h * norm * 0.5 * (inv_d[r.grid.idx(ci)] + inv_d[r.grid.idx(cj)]);
        }
        let k = f.value_at(&target).unwrap();
        assert_eq!(acc.to_bits(), k.to_bits(), "resum {acc} vs field {k}");

        // Values along the path are strictly increasing.
        let vals = f.geodesic_values(&target).unwrap();
        for w in vals.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn disconnected_cells_are_reported_unreachable() {
        let spec = DomainSpec::BoxUnion {
            n: 2,
            boxes: vec![
                AlignedBox::new2(0.0, 0.0, 1.0, 1.0),
                AlignedBox::new2(2.0, 0.0, 3.0, 1.0),
            ],
        };
        let r = rasterize(&spec, 1.0 / 16.0).unwrap();
        let f = solve(&r, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        assert!(f.n_unreachable > 0);
        let err = f.geodesic(&Point::new2(2.5, 0.5)).unwrap_err();
        match err {
            Error::Unreachable { component, base_component, .. } => {
                assert_ne!(component, base_component);
            }
            other => panic!("expected Unreachable, got {other:?}"),
        }
        let (labels, count) = components(&r.grid, &r.inside, Stencil::Full);
        assert_eq!(count, 2);
        assert!(labels.iter().filter(|&&l| l != u32::MAX).count() > 0);
    }

    #[test]
    fn base_snapping_is_deterministic_on_ties() {
        let spec = DomainSpec::UnitCube { n: 2 };
        let r = rasterize(&spec, 1.0 / 32.0).unwrap();
        // (0.5, 0.5) sits exactly on a lattice corner: four nearest centers.
        let f = solve(&r, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        let c = f.base_cell;
        let center = r.grid.center(c);
        assert!(center.x() < 0.5 && center.y() < 0.5, "smallest index wins");
        assert_eq!(f.base_requested, Point::new2(0.5, 0.5));
    }
}
