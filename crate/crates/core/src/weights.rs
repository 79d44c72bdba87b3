//! Weights for the averaged functionals: evaluation, a sampled Muckenhoupt
//! product estimate, weighted quadrature, Hölder cross-checks, and the
//! two-domain union inequality check on a shared grid.

use crate::error::{Error, Result};
use crate::geom::{DomainSpec, Point, UnionPart};
use crate::integrals::{ls_integral, LsIntegral};
use crate::qh::{solve, QhField, Stencil};
use crate::raster::{rasterize_in_box, RasterDomain};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A radial weight density on R^n.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    /// w(x) = value.
    Constant { value: f64 },
    /// w(x) = |x - center|^beta.
    Power { center: Point, beta: f64 },
}

impl Weight {
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Power { center, beta } => {
                let d = p.dist(center);
                if d == 0.0 {
                    if *beta > 0.0 {
                        0.0
                    } else if *beta == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    d.powf(*beta)
                }
            }
        }
    }

    /// Check the exponent range that keeps the weight and, when `r` is given,
    /// its dual power locally integrable in dimension n: `beta > -n` and
    /// `beta < n (r - 1)`.
    pub fn validate_for(&self, n: usize, r: Option<f64>) -> Result<()> {
        match self {
            Weight::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParam(format!(
                        "constant weight must be positive and finite, got {value}"
                    )));
                }
            }
            Weight::Power { center, beta } => {
                if center.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: center.dim() });
                }
                if !(*beta > -(n as f64)) {
                    return Err(Error::InvalidParam(format!(
                        "power weight exponent {beta} is not locally integrable in dimension {n}"
                    )));
                }
                if let Some(r) = r {
                    if !(*beta < n as f64 * (r - 1.0)) {
                        return Err(Error::InvalidParam(format!(
                            "power weight exponent {beta} fails the dual integrability bound {} for r = {r}",
                            n as f64 * (r - 1.0)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sampled estimate of the Muckenhoupt product
/// `avg_B(w) * avg_B(w^{1/(1-r)})^{r-1}` over grid balls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArEstimate {
    pub r: f64,
    /// Largest product seen over all sampled balls; always >= 1 up to
    /// quadrature noise (Hölder).
    pub estimate: f64,
    pub n_balls: usize,
    pub radius_grid: Vec<f64>,
    pub best_center: Point,
    pub best_radius: f64,
    pub seed: u64,
}

/// Estimate the Muckenhoupt r-product of the weight over the rasterized
/// domain by maximizing over `n_balls` sampled ball centers (inside cell
/// centers, drawn as a seed-deterministic prefix so a larger sample with the
/// same seed extends the smaller one) crossed with `radius_grid`.
pub fn ar_estimate(
    weight: &Weight,
    raster: &RasterDomain,
    r: f64,
    n_balls: usize,
    radius_grid: &[f64],
    seed: u64,
) -> Result<ArEstimate> {
    if !(r > 1.0) {
        return Err(Error::InvalidParam(format!("r must exceed 1, got {r}")));
    }
    if n_balls == 0 || radius_grid.is_empty() || radius_grid.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::InvalidParam("need n_balls >= 1 and positive radii".into()));
    }
    let n = raster.grid.n;
    weight.validate_for(n, Some(r))?;

    let inside_cells: Vec<usize> = (0..raster.grid.len()).filter(|&i| raster.inside[i]).collect();
    if inside_cells.is_empty() {
        return Err(Error::EmptyRaster);
    }
    let centers: Vec<Point> = inside_cells
        .iter()
        .map(|&i| raster.grid.center(raster.grid.cell(i)))
        .collect();
    let w_vals: Vec<f64> = centers.iter().map(|c| weight.eval(c)).collect();
    let dual = 1.0 / (1.0 - r);
    let wd_vals: Vec<f64> = w_vals.iter().map(|&w| w.powf(dual)).collect();

    let mut order: Vec<usize> = (0..centers.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.truncate(n_balls.min(centers.len()));

    let mut best = f64::NEG_INFINITY;
    let (mut best_center, mut best_radius) = (centers[order[0]], radius_grid[0]);
    for &ci in &order {
        let b = &centers[ci];
        for &rho in radius_grid {
            let (mut sw, mut swd, mut cnt) = (0.0, 0.0, 0usize);
            for (i, c) in centers.iter().enumerate() {
                if c.dist(b) <= rho {
                    sw += w_vals[i];
                    swd += wd_vals[i];
                    cnt += 1;
                }
            }
            let product = (sw / cnt as f64) * (swd / cnt as f64).powf(r - 1.0);
            if product > best {
                best = product;
                best_center = *b;
                best_radius = rho;
            }
        }
    }
    Ok(ArEstimate {
        r,
        estimate: best,
        n_balls: order.len(),
        radius_grid: radius_grid.to_vec(),
        best_center,
        best_radius,
        seed,
    })
}

/// Weighted L^s functional of a solved field.
pub fn weighted_ls(field: &QhField, s: f64, weight: &Weight) -> Result<LsIntegral> {
    weight.validate_for(field.grid.n, None)?;
    ls_integral(field, s, Some(weight))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HolderReport {
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
    pub equality: bool,
}

/// Check the normalized-mean monotonicity `(avg k^t)^{1/t} <= (avg k^s)^{1/s}`
/// for 0 < t <= s against the same weight.
pub fn holder_check(field: &QhField, weight: &Weight, t: f64, s: f64) -> Result<HolderReport> {
    if !(t > 0.0 && t <= s) {
        return Err(Error::InvalidParam(format!("need 0 < t <= s, got t={t}, s={s}")));
    }
    let lhs = weighted_ls(field, t, weight)?.normalized;
    let rhs = weighted_ls(field, s, weight)?.normalized;
    let ok = lhs <= rhs * (1.0 + 1e-12);
    let equality = (lhs - rhs).abs() <= 1e-12 * rhs.max(1.0);
    Ok(HolderReport { t, s, lhs, rhs, ok, equality })
}

/// Result of the two-domain union inequality check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnionReport {
    pub s: f64,
    pub h: f64,
    /// Discretization allowance `5 h / min dist` on the union raster.
    pub tol: f64,
    /// Worst excess of `k_union` over `k_1* + k_2*` (cells covered by a
    /// finite member field; member value 0 where unavailable).
    pub pointwise_max_violation: f64,
    /// Worst excess of `k_union` over `k_i` on each member's cells.
    pub subset_max_violation: [f64; 2],
    /// Weighted mean of `k_i^s` over member i.
    pub member_means: [f64; 2],
    /// `2^s (C_1 + C_2)`.
    pub bound: f64,
    /// Weighted mean of `k_union^s` over the union.
    pub achieved: f64,
    /// Union cells reachable in the union but in no finite member field;
    /// these carry no pointwise bound and are skipped.
    pub uncovered_cells: usize,
    pub excluded_unreachable: usize,
    pub union_cells: usize,
    pub ok: bool,
    pub notes: Vec<String>,
}

/// One covered union cell from the pointwise check: distances through each
/// member (0 where the member is unavailable) and the remaining slack
/// `k1 + k2 - k_union`, which stays above `-tol`.
#[derive(Clone, Debug, Serialize)]
pub struct UnionCellRow {
    pub center: Point,
    pub k_union: f64,
    pub k1: f64,
    pub k2: f64,
    pub slack: f64,
}

/// Solve the two members and their union on one aligned grid covering both,
/// then check the union theorem numerically: domain monotonicity of k on each
/// member, the pointwise sum bound, and the averaged chain
/// `avg_union(k^s) <= 2^s (C_1 + C_2)`.
///
/// Requires z0 in both members and a nonempty sampled intersection.
pub fn union_check(
    spec1: &DomainSpec,
    spec2: &DomainSpec,
    z0: &Point,
    h: f64,
    s: f64,
    weight: Option<&Weight>,
) -> Result<UnionReport> {
    union_check_impl(spec1, spec2, z0, h, s, weight, false).map(|(rep, _)| rep)
}

/// Same check as [`union_check`], additionally returning one row per covered
/// union cell for report emission.
pub fn union_check_rows(
    spec1: &DomainSpec,
    spec2: &DomainSpec,
    z0: &Point,
    h: f64,
    s: f64,
    weight: Option<&Weight>,
) -> Result<(UnionReport, Vec<UnionCellRow>)> {
    union_check_impl(spec1, spec2, z0, h, s, weight, true)
}

fn union_check_impl(
    spec1: &DomainSpec,
    spec2: &DomainSpec,
    z0: &Point,
    h: f64,
    s: f64,
    weight: Option<&Weight>,
    collect_rows: bool,
) -> Result<(UnionReport, Vec<UnionCellRow>)> {
    spec1.validate()?;
    spec2.validate()?;
    let n = spec1.dim();
    if spec2.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: spec2.dim() });
    }
    if !(s > 0.0) {
        return Err(Error::InvalidParam(format!("exponent s must be positive, got {s}")));
    }
    if let Some(w) = weight {
        w.validate_for(n, None)?;
    }
    if !(spec1.contains(z0)? && spec2.contains(z0)?) {
        return Err(Error::OutsideDomain(z0.raw()[..n].to_vec()));
    }
    let zero = Point::from_slice(&vec![0.0; n])?;
    let union_spec = DomainSpec::UnionOf {
        parts: vec![
            UnionPart { spec: spec1.clone(), shift: zero },
            UnionPart { spec: spec2.clone(), shift: zero },
        ],
    };
    let bbox = spec1.bounding_box().union_with(&spec2.bounding_box());
    let r1 = rasterize_in_box(spec1, h, &bbox)?;
    let r2 = rasterize_in_box(spec2, h, &bbox)?;
    let ru = rasterize_in_box(&union_spec, h, &bbox)?;
    if !r1.grid.same_frame(&r2.grid) || !r1.grid.same_frame(&ru.grid) {
        return Err(Error::GridMismatch("member and union grids disagree".into()));
    }
    if !(0..ru.grid.len()).any(|i| r1.inside[i] && r2.inside[i]) {
        return Err(Error::InvalidParam(
            "the member domains share no grid cell; the union check needs an overlap".into(),
        ));
    }

    let ((f1, f2), fu) = rayon::join(
        || {
            rayon::join(
                || solve(&r1, z0, Stencil::Full),
                || solve(&r2, z0, Stencil::Full),
            )
        },
        || solve(&ru, z0, Stencil::Full),
    );
    let (f1, f2, fu) = (f1?, f2?, fu?);

    let mut notes = Vec::new();
    let min_dist = (0..ru.grid.len())
        .filter(|&i| ru.inside[i])
        .map(|i| ru.dist[i])
        .fold(f64::INFINITY, f64::min);
    let tol = 5.0 * h / min_dist;

    let hn = ru.grid.cell_volume();
    let mut pointwise_max = f64::NEG_INFINITY;
    let mut subset_max = [f64::NEG_INFINITY; 2];
    let (mut raw_u, mut mass_u) = (0.0, 0.0);
    let mut raws = [0.0; 2];
    let mut masses = [0.0; 2];
    let (mut uncovered, mut excluded, mut union_cells) = (0usize, 0usize, 0usize);
    let mut membership_mismatch = 0usize;
    let mut rows = Vec::new();

    for i in 0..ru.grid.len() {
        let in1 = r1.inside[i];
        let in2 = r2.inside[i];
        if ru.inside[i] != (in1 || in2) {
            membership_mismatch += 1;
        }
        let c = ru.grid.center(ru.grid.cell(i));
        let w = weight.map(|w| w.eval(&c)).unwrap_or(1.0);
        let k1 = if in1 { f1.k[i] } else { f64::INFINITY };
        let k2 = if in2 { f2.k[i] } else { f64::INFINITY };
        if in1 && k1.is_finite() {
            raws[0] += k1.powf(s) * w * hn;
            masses[0] += w * hn;
        }
        if in2 && k2.is_finite() {
            raws[1] += k2.powf(s) * w * hn;
            masses[1] += w * hn;
        }
        if !ru.inside[i] {
            continue;
        }
        union_cells += 1;
        let ku = fu.k[i];
        if !ku.is_finite() {
            excluded += 1;
            continue;
        }
        raw_u += ku.powf(s) * w * hn;
        mass_u += w * hn;
        if in1 && k1.is_finite() {
            subset_max[0] = subset_max[0].max(ku - k1);
        }
        if in2 && k2.is_finite() {
            subset_max[1] = subset_max[1].max(ku - k2);
        }
        let covered = (in1 && k1.is_finite()) || (in2 && k2.is_finite());
        if !covered {
            uncovered += 1;
            continue;
        }
        let k1s = if in1 && k1.is_finite() { k1 } else { 0.0 };
        let k2s = if in2 && k2.is_finite() { k2 } else { 0.0 };
        pointwise_max = pointwise_max.max(ku - (k1s + k2s));
        if collect_rows {
            rows.push(UnionCellRow {
                center: c,
                k_union: ku,
                k1: k1s,
                k2: k2s,
                slack: k1s + k2s - ku,
            });
        }
    }
    if membership_mismatch > 0 {
        notes.push(format!("{membership_mismatch} cells change membership between union and members"));
    }
    if uncovered > 0 {
        notes.push(format!("{uncovered} union cells are reachable only through the union; pointwise bound skipped there"));
    }

    let member_means = [raws[0] / masses[0], raws[1] / masses[1]];
    let bound = 2f64.powf(s) * (member_means[0] + member_means[1]);
    let achieved = raw_u / mass_u;
    let ok = pointwise_max <= tol
        && subset_max.iter().all(|&v| v <= tol)
        && achieved <= bound * (1.0 + 1e-9);
    let report = UnionReport {
        s,
        h,
        tol,
        pointwise_max_violation: pointwise_max,
        subset_max_violation: subset_max,
        member_means,
        bound,
        achieved,
        uncovered_cells: uncovered,
        excluded_unreachable: excluded,
        union_cells,
        ok,
        notes,
    };
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::AlignedBox;
    use crate::raster::rasterize;

    fn square(x0: f64, y0: f64) -> DomainSpec {
        DomainSpec::BoxUnion {
            n: 2,
            boxes: vec![AlignedBox::new2(x0, y0, x0 + 1.0, y0 + 1.0)],
        }
    }

    #[test]
    fn constant_weight_product_is_exactly_one() {
        let raster = rasterize(&square(0.0, 0.0), 1.0 / 32.0).unwrap();
        for value in [1.0, 5.0] {
            let est = ar_estimate(
                &Weight::Constant { value },
                &raster,
                2.0,
                12,
                &[0.1, 0.3],
                7,
            )
            .unwrap();
            assert!((est.estimate - 1.0).abs() < 1e-12, "{}", est.estimate);
        }
    }

    #[test]
    fn ar_estimate_is_prefix_monotone_and_at_least_one() {
        let raster = rasterize(&square(0.0, 0.0), 1.0 / 32.0).unwrap();
        let w = Weight::Power { center: Point::new2(0.5, 0.5), beta: 1.0 };
        let small = ar_estimate(&w, &raster, 2.0, 8, &[0.1, 0.25], 42).unwrap();
        let large = ar_estimate(&w, &raster, 2.0, 16, &[0.1, 0.25], 42).unwrap();
        assert!(large.estimate >= small.estimate);
        assert!(small.estimate >= 1.0 - 1e-12);
        // Doubling again moves the estimate by little: the maximizer is near
        // the weight's zero and is found early.
        let huge = ar_estimate(&w, &raster, 2.0, 256, &[0.1, 0.25], 42).unwrap();
        assert!(huge.estimate >= large.estimate);
        assert!(
            (huge.estimate - large.estimate) / huge.estimate < 0.25,
            "{} vs {}",
            large.estimate,
            huge.estimate
        );
    }

    #[test]
    fn ar_exponent_validation() {
        let w = Weight::Power { center: Point::new2(0.0, 0.0), beta: -2.5 };
        assert!(w.validate_for(2, None).is_err());
        let w = Weight::Power { center: Point::new2(0.0, 0.0), beta: 3.0 };
        assert!(w.validate_for(2, Some(2.0)).is_err()); // needs beta < n(r-1) = 2
        assert!(w.validate_for(2, Some(3.0)).is_ok());
        assert!(Weight::Constant { value: 0.0 }.validate_for(2, None).is_err());
    }

    #[test]
    fn weighted_ls_matches_unweighted_for_trivial_weights() {
        let raster = rasterize(&square(0.0, 0.0), 1.0 / 64.0).unwrap();
        let field = solve(&raster, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        let plain = ls_integral(&field, 2.0, None).unwrap();
        let one = weighted_ls(&field, 2.0, &Weight::Constant { value: 1.0 }).unwrap();
        assert_eq!(plain.raw, one.raw);
        assert_eq!(plain.normalized, one.normalized);
        let three = weighted_ls(&field, 2.0, &Weight::Constant { value: 3.0 }).unwrap();
        assert!((three.raw - 3.0 * plain.raw).abs() <= 1e-12 * plain.raw);
        assert!((three.normalized - plain.normalized).abs() <= 1e-12 * plain.normalized);
    }

    #[test]
    fn holder_check_orders_and_flags_equality() {
        let raster = rasterize(&square(0.0, 0.0), 1.0 / 64.0).unwrap();
        let field = solve(&raster, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        let w = Weight::Power { center: Point::new2(0.5, 0.5), beta: 0.5 };
        let strict = holder_check(&field, &w, 1.0, 2.0).unwrap();
        assert!(strict.ok && !strict.equality && strict.lhs < strict.rhs);
        let equal = holder_check(&field, &w, 2.0, 2.0).unwrap();
        assert!(equal.ok && equal.equality);
        assert!(holder_check(&field, &w, 0.0, 1.0).is_err());
    }

    #[test]
    fn union_of_overlapping_squares_passes_all_chains() {
        let a = square(0.0, 0.0);
        let b = square(0.5, 0.0);
        let rep = union_check(&a, &b, &Point::new2(0.75, 0.5), 1.0 / 32.0, 2.0, None).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert!(rep.pointwise_max_violation <= rep.tol);
        // Domain monotonicity is exact on the grid: enlarging the domain can
        // only shorten weighted paths.
        assert!(rep.subset_max_violation[0] <= 1e-12);
        assert!(rep.subset_max_violation[1] <= 1e-12);
        assert!(rep.achieved <= rep.bound);
        assert_eq!(rep.uncovered_cells, 0);
    }

    #[test]
    fn union_check_with_weight_and_nested_member() {
        let ab = DomainSpec::UnionOf {
            parts: vec![
                UnionPart { spec: square(0.0, 0.0), shift: Point::new2(0.0, 0.0) },
                UnionPart { spec: square(0.5, 0.0), shift: Point::new2(0.0, 0.0) },
            ],
        };
        let c = square(1.0, 0.5);
        let w = Weight::Power { center: Point::new2(1.0, 0.75), beta: 1.0 };
        let rep =
            union_check(&ab, &c, &Point::new2(1.2, 0.75), 1.0 / 32.0, 1.5, Some(&w)).unwrap();
        assert!(rep.ok, "{rep:?}");
    }

    #[test]
    fn union_check_rejects_bad_configurations() {
        let a = square(0.0, 0.0);
        let b = square(0.5, 0.0);
        // Base point outside one member.
        assert!(matches!(
            union_check(&a, &b, &Point::new2(0.25, 0.5), 1.0 / 32.0, 2.0, None),
            Err(Error::OutsideDomain(_))
        ));
        // Disjoint members share no cell.
        let far = square(3.0, 0.0);
        assert!(union_check(&a, &far, &Point::new2(0.5, 0.5), 1.0 / 32.0, 2.0, None).is_err());
        // Dimension mismatch.
        let cube = DomainSpec::UnitCube { n: 3 };
        assert!(matches!(
            union_check(&a, &cube, &Point::new2(0.5, 0.5), 1.0 / 32.0, 2.0, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
