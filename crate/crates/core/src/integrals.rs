//! L^s functionals of the distance field: quadrature, refinement sweeps with
//! a growth classification along the truncation axis, threshold scans, and
//! the rooms-and-halls Poincaré-ratio experiment.
//!
//! The averaging property of a domain is equivalent to finiteness of the
//! normalized functional `(mean of k^s)^{1/s}`; the counterexample domains
//! fail it through infinitely many features, so divergence is detected by
//! deepening a feature truncation at fixed cell size rather than by refining
//! the grid. Classification thresholds are conventions and are recorded in
//! every report.

use crate::error::{Error, Result};
use crate::geom::{DomainSpec, Point, StageRegion};
use crate::qh::{solve, QhField, Stencil};
use crate::raster::{rasterize, RasterDomain};
use crate::weights::Weight;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Increment-ratio level at or below which the truncation sweep saturates.
pub const SATURATING_RATIO: f64 = 0.8;
/// Increment-ratio level at or above which the truncation sweep grows.
pub const GROWING_RATIO: f64 = 1.0;
/// Number of trailing truncation steps (increments) the classifier inspects;
/// the ratios are formed within this window, so it yields `WINDOW_STEPS - 1`
/// ratios. Keeping the window at the deep end makes the verdict insensitive
/// to shallow-band quadrature noise.
pub const WINDOW_STEPS: usize = 3;

/// Stage quadrature counts only cells whose boundary distance is at least
/// this multiple of h. A cell center can land arbitrarily close to a curved
/// boundary; the discrete field there is inflated by ~h/d with unbounded
/// relative error, and one such cell can dominate a whole truncation band at
/// large s. Cells at least half a cell from the boundary have uniformly
/// bounded relative error, so increments along the truncation axis reflect
/// the feature geometry rather than boundary-layer noise.
pub const RESOLVED_DIST_FACTOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Saturating,
    Growing,
    Inconclusive,
}

/// One weighted L^s quadrature of a solved field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LsIntegral {
    /// `sum k(c)^s w(c) h^n` over included cells.
    pub raw: f64,
    /// `(raw / mass)^{1/s}`.
    pub normalized: f64,
    /// `sum w(c) h^n` over included cells.
    pub mass: f64,
    pub cells: usize,
    /// Cells dropped because the solver could not reach them.
    pub excluded_unreachable: usize,
}

/// Integrate `k^s` against the weight over the whole field.
pub fn ls_integral(field: &QhField, s: f64, weight: Option<&Weight>) -> Result<LsIntegral> {
    ls_integral_region(field, s, weight, None)
}

/// Integrate `k^s` against the weight over the cells whose centers lie in
/// `region` (all inside cells when `None`).
pub fn ls_integral_region(
    field: &QhField,
    s: f64,
    weight: Option<&Weight>,
    region: Option<&StageRegion>,
) -> Result<LsIntegral> {
    if !(s > 0.0) {
        return Err(Error::InvalidParam(format!("exponent s must be positive, got {s}")));
    }
    let grid = &field.grid;
    let hn = grid.cell_volume();
    let (mut raw, mut mass) = (0.0, 0.0);
    let (mut cells, mut excluded) = (0usize, 0usize);
    for idx in 0..field.inside.len() {
        if !field.inside[idx] {
            continue;
        }
        let c = grid.center(grid.cell(idx));
        if let Some(r) = region {
            if !r.contains(&c) {
                continue;
            }
        }
        let k = field.k[idx];
        if !k.is_finite() {
            excluded += 1;
            continue;
        }
        let w = weight.map(|w| w.eval(&c)).unwrap_or(1.0);
        raw += k.powf(s) * w * hn;
        mass += w * hn;
        cells += 1;
    }
    if cells == 0 {
        return Err(Error::InvalidParam(
            "no reachable cells to integrate over".into(),
        ));
    }
    Ok(LsIntegral {
        raw,
        normalized: (raw / mass).powf(s.recip()),
        mass,
        cells,
        excluded_unreachable: excluded,
    })
}

/// One sweep sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub h: f64,
    pub truncation: u32,
    pub raw: f64,
    pub normalized: f64,
    pub cells: usize,
    pub excluded_unreachable: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralReport {
    pub s: f64,
    pub z0: Point,
    pub rows: Vec<SweepRow>,
    pub classification: Classification,
    /// Least-squares slope of `ln(increment)` against the truncation index
    /// over the classification window at the finest h (None when fewer than
    /// two positive increments exist there).
    pub slope: Option<f64>,
    /// The classification rule, recorded verbatim.
    pub rule: String,
    pub notes: Vec<String>,
}

fn classification_rule(h: f64) -> String {
    format!(
        "increments of raw along the truncation axis at h = {h}: take the last {WINDOW_STEPS} \
         increments; saturating if their successive ratios are all <= {SATURATING_RATIO}, \
         growing if all >= {GROWING_RATIO}, else inconclusive; fewer than {WINDOW_STEPS} \
         increments (< {} truncation points) forces inconclusive; stage quadrature counts \
         resolved cells only (boundary distance >= {RESOLVED_DIST_FACTOR} h)",
        WINDOW_STEPS + 1
    )
}

fn classify_increments(rows: &[SweepRow]) -> (Classification, Option<f64>) {
    let raw_scale = rows.last().map(|r| r.raw).unwrap_or(0.0).max(1e-300);
    let increments: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            let d = w[1].raw - w[0].raw;
            if d.abs() <= 1e-13 * raw_scale {
                0.0
            } else {
                d
            }
        })
        .collect();
    if increments.len() < WINDOW_STEPS {
        return (Classification::Inconclusive, None);
    }
    let window = &increments[increments.len() - WINDOW_STEPS..];
    let ratios: Vec<f64> = window
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 && w[1] == 0.0 {
                0.0
            } else if w[0] == 0.0 {
                f64::INFINITY
            } else {
                w[1] / w[0]
            }
        })
        .collect();
    let classification = if ratios.iter().all(|&q| q <= SATURATING_RATIO) {
        Classification::Saturating
    } else if ratios.iter().all(|&q| q >= GROWING_RATIO) {
        Classification::Growing
    } else {
        Classification::Inconclusive
    };

    let pts: Vec<(f64, f64)> = window
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, &d)| (i as f64, d.ln()))
        .collect();
    let slope = if pts.len() < 2 {
        None
    } else {
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (sxx, sxy): (f64, f64) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0 * p.0, a.1 + p.0 * p.1));
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    };
    (classification, slope)
}

fn check_sweep_axes(h_list: &[f64], truncation_list: &[u32]) -> Result<()> {
    if h_list.is_empty() || truncation_list.is_empty() {
        return Err(Error::InvalidParam("sweep needs at least one h and one truncation".into()));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParam("h list must be strictly decreasing".into()));
    }
    if truncation_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("truncation list must be strictly deepening".into()));
    }
    Ok(())
}

/// Rasterize and solve once per h, at the deepest requested truncation.
fn sweep_fields(
    spec: &DomainSpec,
    z0: &Point,
    h_list: &[f64],
    deepest: u32,
    notes: &mut Vec<String>,
) -> Result<Vec<(RasterDomain, QhField)>> {
    let deep_spec = spec.with_sweep_depth(deepest);
    let mut fields = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let raster = rasterize(&deep_spec, h)?;
        if raster.truncation.dropped_measure > 0.0 {
            notes.push(format!(
                "h = {h}: raster truncation dropped measure {:.3e} ({})",
                raster.truncation.dropped_measure,
                raster.truncation.dropped.join("; ")
            ));
        }
        let field = solve(&raster, z0, Stencil::Full)?;
        fields.push((raster, field));
    }
    Ok(fields)
}

fn rows_for(
    spec: &DomainSpec,
    raster: &RasterDomain,
    field: &QhField,
    h: f64,
    s: f64,
    truncation_list: &[u32],
) -> Vec<SweepRow> {
    let hn = field.grid.cell_volume();
    let min_dist = RESOLVED_DIST_FACTOR * h;
    truncation_list
        .iter()
        .map(|&t| {
            let region = spec.sweep_stage(t);
            let (mut raw, mut cells, mut excluded) = (0.0, 0usize, 0usize);
            for idx in 0..field.inside.len() {
                if !field.inside[idx] || raster.dist[idx] < min_dist {
                    continue;
                }
                let c = field.grid.center(field.grid.cell(idx));
                if !region.contains(&c) {
                    continue;
                }
                let k = field.k[idx];
                if !k.is_finite() {
                    excluded += 1;
                    continue;
                }
                raw += k.powf(s) * hn;
                cells += 1;
            }
            let normalized = if cells == 0 {
                0.0
            } else {
                (raw / (cells as f64 * hn)).powf(s.recip())
            };
            SweepRow {
                h,
                truncation: t,
                raw,
                normalized,
                cells,
                excluded_unreachable: excluded,
            }
        })
        .collect()
}

/// Sweep the L^s functional over grid sizes and feature truncations and
/// classify its growth along the truncation axis at the finest h.
///
/// Each (h, truncation) row integrates `k^s` over the truncation stage's
/// resolved cells (boundary distance at least [`RESOLVED_DIST_FACTOR`]·h);
/// see that constant for why the boundary layer is withheld from the stage
/// sums. The full unfiltered quadrature remains available via
/// [`ls_integral`].
pub fn refinement_sweep(
    spec: &DomainSpec,
    z0: &Point,
    s: f64,
    h_list: &[f64],
    truncation_list: &[u32],
) -> Result<IntegralReport> {
    spec.validate()?;
    check_sweep_axes(h_list, truncation_list)?;
    let mut notes = Vec::new();
    let deepest = *truncation_list.last().expect("nonempty");
    let fields = sweep_fields(spec, z0, h_list, deepest, &mut notes)?;
    let mut rows = Vec::new();
    for ((raster, field), &h) in fields.iter().zip(h_list) {
        rows.extend(rows_for(spec, raster, field, h, s, truncation_list));
    }
    let finest = &rows[rows.len() - truncation_list.len()..];
    let (classification, slope) = classify_increments(finest);
    Ok(IntegralReport {
        s,
        z0: *z0,
        rows,
        classification,
        slope,
        rule: classification_rule(*h_list.last().expect("nonempty")),
        notes,
    })
}

/// Threshold scan over a grid of exponents, sharing one solve per h.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub s_grid: Vec<f64>,
    pub classifications: Vec<Classification>,
    pub reports: Vec<IntegralReport>,
    /// Largest saturating s and smallest growing s, when both exist in order.
    pub bracket: Option<(f64, f64)>,
    /// Midpoint of the bracket.
    pub estimate: Option<f64>,
    /// Half-width of the bracket.
    pub resolution: Option<f64>,
    pub notes: Vec<String>,
}

pub fn threshold_scan(
    spec: &DomainSpec,
    z0: &Point,
    s_grid: &[f64],
    h_list: &[f64],
    truncation_list: &[u32],
) -> Result<ThresholdScan> {
    spec.validate()?;
    check_sweep_axes(h_list, truncation_list)?;
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("s grid must be strictly increasing with >= 2 points".into()));
    }
    let mut notes = Vec::new();
    let deepest = *truncation_list.last().expect("nonempty");
    let fields = sweep_fields(spec, z0, h_list, deepest, &mut notes)?;

    let reports: Vec<IntegralReport> = s_grid
        .par_iter()
        .map(|&s| {
            let mut rows = Vec::new();
            for ((raster, field), &h) in fields.iter().zip(h_list) {
                rows.extend(rows_for(spec, raster, field, h, s, truncation_list));
            }
            let finest = &rows[rows.len() - truncation_list.len()..];
            let (classification, slope) = classify_increments(finest);
            IntegralReport {
                s,
                z0: *z0,
                rows,
                classification,
                slope,
                rule: classification_rule(*h_list.last().expect("nonempty")),
                notes: Vec::new(),
            }
        })
        .collect();

    let classifications: Vec<Classification> =
        reports.iter().map(|r| r.classification).collect();
    let sat_max = s_grid
        .iter()
        .zip(&classifications)
        .filter(|(_, c)| **c == Classification::Saturating)
        .map(|(s, _)| *s)
        .fold(None::<f64>, |a, s| Some(a.map_or(s, |v| v.max(s))));
    let grow_min = s_grid
        .iter()
        .zip(&classifications)
        .filter(|(_, c)| **c == Classification::Growing)
        .map(|(s, _)| *s)
        .fold(None::<f64>, |a, s| Some(a.map_or(s, |v| v.min(s))));
    let (bracket, estimate, resolution) = match (sat_max, grow_min) {
        (Some(a), Some(b)) if a < b => (Some((a, b)), Some(0.5 * (a + b)), Some(0.5 * (b - a))),
        _ => {
            notes.push("no saturating-to-growing transition across the s grid; no estimate".into());
            (None, None, None)
        }
    };
    Ok(ThresholdScan {
        s_grid: s_grid.to_vec(),
        classifications,
        reports,
        bracket,
        estimate,
        resolution,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Poincaré ratio on the mirrored rooms-and-halls domain
// ---------------------------------------------------------------------------

/// The Poincaré quotient of the odd test function that ramps from 0 to 1
/// across hall j (and to -1 across its mirror): `a_j = |u - mean|_p / |grad u|_p`.
/// All integrals are closed-form (the function is piecewise linear and its
/// gradient is supported on the two copies of hall j), evaluated on the
/// geometry truncated exactly as a raster at cell size h would be.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoincareRatio {
    pub j: u32,
    pub p: f64,
    pub h: f64,
    /// Deepest room/hall index the truncation keeps.
    pub j_eff: u32,
    pub ratio: f64,
    /// Closed-form lower bound `((j+1)! / (2^{j+2})^p)^{1/p}`.
    pub lower_bound: f64,
}

fn room_measure(i: u32) -> f64 {
    if i == 0 {
        0.5
    } else {
        2f64.powi(-(i as i32 + 2))
    }
}

fn hall_measure(i: u32) -> f64 {
    2f64.powi(-(i as i32 + 2)) * crate::geom::rh_hall_height(i)
}

pub fn poincare_ratio(j: u32, p: f64, h: f64) -> Result<PoincareRatio> {
    if j < 1 || !(p >= 1.0) {
        return Err(Error::InvalidParam(format!("need j >= 1 and p >= 1, got j={j}, p={p}")));
    }
    let ambient = DomainSpec::RoomsAndHalls { j_max: 24 };
    let (effective, _) = ambient.truncated(h);
    let j_eff = match effective {
        DomainSpec::RoomsAndHalls { j_max } => j_max,
        _ => unreachable!("truncation preserves the family"),
    };
    if j > j_eff {
        return Err(Error::FeatureTruncatedAway(format!(
            "hall {j} is not resolved at h = {h} (deepest kept index {j_eff})"
        )));
    }
    // The function is odd, so its mean is 0 and both integrals are twice the
    // right-half contributions: |u| = 1 on rooms j..=j_eff and halls
    // (j+1)..=j_eff, a linear ramp on hall j, and 0 between the mirror halls.
    let rooms: f64 = (j..=j_eff).map(room_measure).sum();
    let halls: f64 = (j + 1..=j_eff).map(hall_measure).sum();
    let ramp = hall_measure(j) / (p + 1.0);
    let numer_p = 2.0 * (rooms + halls + ramp);
    let slope = 2f64.powi(j as i32 + 2);
    let denom_p = slope.powf(p) * 2.0 * hall_measure(j);
    let ratio = (numer_p / denom_p).powf(p.recip());
    let lower_bound = (crate::geom::factorial(j + 1) / slope.powf(p)).powf(p.recip());
    Ok(PoincareRatio { j, p, h, j_eff, ratio, lower_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::AlignedBox;

    fn square_field(h: f64) -> QhField {
        let raster = rasterize(&DomainSpec::UnitCube { n: 2 }, h).unwrap();
        solve(&raster, &Point::new2(0.5, 0.5), Stencil::Full).unwrap()
    }

    #[test]
    fn single_cell_field_integrates_to_zero() {
        let spec = DomainSpec::BoxUnion { n: 2, boxes: vec![AlignedBox::new2(0.0, 0.0, 1.0, 1.0)] };
        let raster = rasterize(&spec, 0.8).unwrap();
        assert_eq!(raster.inside_count(), 1);
        let field = solve(&raster, &Point::new2(0.4, 0.4), Stencil::Full).unwrap();
        let q = ls_integral(&field, 1.0, None).unwrap();
        assert_eq!(q.raw, 0.0);
        assert_eq!(q.normalized, 0.0);
    }

    #[test]
    fn unit_square_normalized_is_refinement_stable() {
        let a = ls_integral(&square_field(1.0 / 128.0), 1.0, None).unwrap();
        let b = ls_integral(&square_field(1.0 / 256.0), 1.0, None).unwrap();
        assert!(a.normalized.is_finite() && b.normalized.is_finite());
        assert!(
            ((a.normalized - b.normalized) / b.normalized).abs() < 0.02,
            "{} vs {}",
            a.normalized,
            b.normalized
        );
    }

    #[test]
    fn holder_monotonicity_and_log_convexity() {
        let field = square_field(1.0 / 64.0);
        let l1 = ls_integral(&field, 1.0, None).unwrap();
        let l15 = ls_integral(&field, 1.5, None).unwrap();
        let l2 = ls_integral(&field, 2.0, None).unwrap();
        assert!(l1.normalized <= l2.normalized * (1.0 + 1e-12));
        // Log-convexity of moments in s.
        assert!(l15.raw * l15.raw <= l1.raw * l2.raw * (1.0 + 1e-12));
        // Fractional exponents below 1 are allowed and still dominated.
        let lt = ls_integral(&field, 0.5, None).unwrap();
        assert!(lt.normalized <= l1.normalized * (1.0 + 1e-12));
    }

    #[test]
    fn unreachable_cells_are_excluded_and_counted() {
        let spec = DomainSpec::BoxUnion {
            n: 2,
            boxes: vec![
                AlignedBox::new2(0.0, 0.0, 1.0, 1.0),
                AlignedBox::new2(2.0, 0.0, 3.0, 1.0),
            ],
        };
        let raster = rasterize(&spec, 1.0 / 16.0).unwrap();
        let field = solve(&raster, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        assert!(field.n_unreachable > 0);
        let q = ls_integral(&field, 2.0, None).unwrap();
        assert_eq!(q.excluded_unreachable, field.n_unreachable);
        assert!(q.normalized.is_finite());
    }

    #[test]
    fn sweep_axis_validation() {
        let spec = DomainSpec::UnitCube { n: 2 };
        let z0 = Point::new2(0.5, 0.5);
        assert!(refinement_sweep(&spec, &z0, 1.0, &[0.1, 0.1], &[1, 2, 3]).is_err());
        assert!(refinement_sweep(&spec, &z0, 1.0, &[0.1, 0.05], &[2, 2]).is_err());
        assert!(refinement_sweep(&spec, &z0, 1.0, &[], &[1]).is_err());
        // Two truncation points cannot be classified.
        let rep = refinement_sweep(&spec, &z0, 1.0, &[1.0 / 16.0], &[1, 2]).unwrap();
        assert_eq!(rep.classification, Classification::Inconclusive);
    }

    #[test]
    fn unit_cube_sweep_saturates() {
        let rep = refinement_sweep(
            &DomainSpec::UnitCube { n: 2 },
            &Point::new2(0.5, 0.5),
            2.0,
            &[1.0 / 32.0, 1.0 / 64.0],
            &[1, 2, 3, 4],
        )
        .unwrap();
        assert_eq!(rep.classification, Classification::Saturating);
        // Raw is constant across the (trivial) stages, nondecreasing.
        for w in rep.rows.windows(2) {
            if w[0].h == w[1].h {
                assert!(w[1].raw >= w[0].raw - 1e-12);
            }
        }
        assert!(rep.rule.contains("0.8"));
    }

    #[test]
    fn cusp_sweep_matches_threshold_sides() {
        // Critical exponent for this cusp: n/(alpha-1) + n - 1 = 2.
        let spec = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        let z0 = Point::new2(0.75, 0.0);
        let h_list = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
        let ts = [1, 2, 3, 4, 5];
        let below = refinement_sweep(&spec, &z0, 1.5, &h_list, &ts).unwrap();
        assert_eq!(below.classification, Classification::Saturating, "{:?}", below.rows);
        let above = refinement_sweep(&spec, &z0, 2.5, &h_list, &ts).unwrap();
        assert_eq!(above.classification, Classification::Growing, "{:?}", above.rows);
        // Raw nondecreasing along the truncation axis at fixed h.
        for rep in [&below, &above] {
            for w in rep.rows.windows(2) {
                if w[0].h == w[1].h {
                    assert!(w[1].raw >= w[0].raw);
                }
            }
        }
        // Growth slopes match the sides of the threshold.
        assert!(above.slope.unwrap() > 0.0);
        assert!(below.slope.unwrap() < 0.0);
    }

    #[test]
    fn block_tower_sweep_sides() {
        let spec = DomainSpec::BlockTower { n: 2, m_max: 31 };
        let z0 = Point::new2(0.5, 0.5);
        let h_list = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
        let ts = [1, 2, 3, 4, 5];
        let above = refinement_sweep(&spec, &z0, 3.0, &h_list, &ts).unwrap();
        assert_eq!(above.classification, Classification::Growing, "{:?}", above.rows);
        let below = refinement_sweep(&spec, &z0, 1.0, &h_list, &ts).unwrap();
        assert_eq!(below.classification, Classification::Saturating, "{:?}", below.rows);
    }

    #[test]
    fn cusp_threshold_scan_brackets_critical_s() {
        let spec = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        let scan = threshold_scan(
            &spec,
            &Point::new2(0.75, 0.0),
            &[1.0, 1.5, 2.0, 2.5, 3.0],
            &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
            &[1, 2, 3, 4, 5],
        )
        .unwrap();
        let (lo, hi) = scan.bracket.expect("bracket exists");
        // True critical exponent: n/(alpha-1) + n - 1 = 2.
        assert!(lo < 2.0 + 1e-12 && 2.0 <= hi + 1e-12, "bracket ({lo}, {hi})");
        assert!((scan.estimate.unwrap() - 2.0).abs() <= scan.resolution.unwrap() + 1e-12);

        // A grid entirely on one side produces no estimate but still reports.
        let one_sided = threshold_scan(
            &spec,
            &Point::new2(0.75, 0.0),
            &[1.0, 1.5],
            &[1.0 / 256.0],
            &[2, 3, 4, 5],
        )
        .unwrap();
        assert!(one_sided.estimate.is_none());
        assert!(!one_sided.notes.is_empty());
    }

    #[test]
    fn poincare_ratio_matches_closed_forms() {
        let r3 = poincare_ratio(3, 2.0, 1.0 / 2048.0).unwrap();
        assert_eq!(r3.j_eff, 5);
        assert!((r3.lower_bound - (24.0f64 / 1024.0).sqrt()).abs() < 1e-12);
        assert!((r3.ratio - 0.20359).abs() < 5e-5, "{}", r3.ratio);
        assert!(r3.ratio >= r3.lower_bound);

        let r5 = poincare_ratio(5, 2.0, 1.0 / 2048.0).unwrap();
        assert!((r5.lower_bound - (720.0f64 / 16384.0).sqrt()).abs() < 1e-12);
        assert!(r5.lower_bound > r3.lower_bound);
        assert!(r5.ratio >= r5.lower_bound);

        // Unresolvable hall index errors out.
        assert!(matches!(
            poincare_ratio(9, 2.0, 1.0 / 256.0),
            Err(Error::FeatureTruncatedAway(_))
        ));
    }
}
