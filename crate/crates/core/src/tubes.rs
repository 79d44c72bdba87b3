//! Essential-tube certificates.
//!
//! A tube is a Euclidean cylinder (a rectangle in the plane): `base` is the
//! center of one end, `axis` the unit direction toward the other, `l` the
//! length and `r` the radius. Its *wall* is the lateral boundary (not the two
//! end disks). A tube is *essential* for a domain if some connected component
//! of tube ∩ domain avoids the wall and covers at least a fraction `c` of
//! every cross-slice. Such a component forces the distance field to grow
//! linearly along the tube, which yields a closed-form lower bound on the
//! L^s mass of the field over the component. A family of such tubes with
//! pairwise disjoint components and a divergent term series therefore
//! certifies that the normalized L^s means of the field are unbounded.
//!
//! Verification here is sampling-based but uses exact membership: interior
//! samples feed a flood fill that identifies the component and measures slice
//! fractions, and wall samples (offset outward by a relative 1e-9 so they sit
//! strictly off the closed wall) must all land outside the domain.

use crate::error::{Error, Result};
use crate::geom::{AlignedBox, DomainSpec, Point, RectFrame, MAX_DIM};
use crate::series::{unit_ball_volume, SeriesReport, SeriesVerdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative outward offset for wall samples.
const WALL_EPS: f64 = 1e-9;

/// A placed cylinder with a claimed minimal slice fraction `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    /// Center of the end at axial coordinate 0.
    pub base: Point,
    /// Unit direction from `base` toward the other end.
    pub axis: Point,
    pub l: f64,
    pub r: f64,
    /// Claimed minimal slice fraction (a statement about the construction;
    /// verification measures its own estimate).
    pub c: f64,
}

impl Tube {
    /// Orthonormal transverse directions (deterministic).
    pub fn transverse(&self) -> Result<[Point; 2]> {
        let a = self.axis.unit()?;
        if self.base.dim() == 2 {
            Ok([a.perp2(), Point::new3(0.0, 0.0, 1.0)])
        } else {
            // Cross with the coordinate axis least aligned with `a`.
            let raw = a.raw();
            let least = (0..3).min_by(|&i, &j| raw[i].abs().total_cmp(&raw[j].abs())).unwrap();
            let mut e = [0.0; MAX_DIM];
            e[least] = 1.0;
            let e = Point::new3(e[0], e[1], e[2]);
            let t1 = e.cross(&a).unit()?;
            let t2 = a.cross(&t1);
            Ok([t1, t2])
        }
    }

    /// World point at local coordinates (axial t, transverse u, v).
    pub fn world(&self, t: f64, u: f64, v: f64) -> Result<Point> {
        let [t1, t2] = self.transverse()?;
        Ok(self
            .base
            .add_scaled(&self.axis, t)
            .add_scaled(&t1, u)
            .add_scaled(&t2, v))
    }

    /// Closed-tube membership.
    pub fn contains(&self, p: &Point) -> bool {
        let d = p.sub(&self.base);
        let t = d.dot(&self.axis);
        if t < 0.0 || t > self.l {
            return false;
        }
        let radial2 = d.dot(&d) - t * t;
        radial2 <= self.r * self.r * (1.0 + 1e-12)
    }

    /// Loose axis-aligned bounding box.
    pub fn aabb(&self) -> AlignedBox {
        let n = self.base.dim();
        let far = self.base.add_scaled(&self.axis, self.l);
        let mut b = AlignedBox { lo: [0.0; MAX_DIM], hi: [0.0; MAX_DIM], dim: n };
        for a in 0..n {
            b.lo[a] = self.base.raw()[a].min(far.raw()[a]) - self.r;
            b.hi[a] = self.base.raw()[a].max(far.raw()[a]) + self.r;
        }
        b
    }

    /// The tube scaled about the origin by `lambda` (for invariance checks).
    pub fn scaled(&self, lambda: f64) -> Tube {
        Tube {
            base: self.base.scaled(lambda),
            axis: self.axis,
            l: self.l * lambda,
            r: self.r * lambda,
            c: self.c,
        }
    }
}

/// Scale parameters of one series term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    pub l: f64,
    pub r: f64,
    pub c: f64,
}

/// Closed-form lower bound on the integral of the s-th power of the distance
/// field over an essential tube's component:
/// `V_{n-1} / ((s+1) 2^{s+1}) * c * r^n * (l/r)^{s+1}`.
pub fn tube_lower_bound(p: &TubeParams, s: f64, n: usize) -> f64 {
    unit_ball_volume(n - 1) / ((s + 1.0) * 2f64.powf(s + 1.0))
        * p.c
        * p.r.powi(n as i32)
        * (p.l / p.r).powf(s + 1.0)
}

/// The scale part of a series term, `c * r^n * (l/r)^{s+1}`. The constant
/// prefactor of [`tube_lower_bound`] is common to every term, so divergence
/// of these terms is equivalent to divergence of the bound series.
pub fn series_term(p: &TubeParams, s: f64, n: usize) -> f64 {
    p.c * p.r.powi(n as i32) * (p.l / p.r).powf(s + 1.0)
}

/// An indexed family of tubes: concrete geometry for verification plus the
/// per-index scale parameters used for series terms. The two lists correspond
/// index-by-index; series parameters may be conservative estimates of the
/// geometric tubes (valid whenever they only shrink the lower bound).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeFamily {
    pub name: String,
    pub n: usize,
    /// Index of the first tube (families are indexed consecutively from it).
    pub first_index: u32,
    pub tubes: Vec<Tube>,
    pub series_params: Vec<TubeParams>,
}

/// Result of sampling-based verification of one tube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeCheck {
    /// Minimal measured slice fraction of the chosen component.
    pub c_hat: f64,
    /// All outward-offset wall samples were outside the domain.
    pub wall_clear: bool,
    /// Number of connected components of tube ∩ domain seen by the raster.
    pub n_components: usize,
    /// Cells of the chosen (largest) component.
    pub component_cells: usize,
    /// Claimed fraction this check was evaluated against.
    pub c_claimed: f64,
    /// wall_clear and c_hat >= c_claimed (1 - tol).
    pub ok: bool,
}

/// Verify the essential-tube conditions for `tube` against `spec` by sampling
/// a local raster of `n_slices` cross-slices with `samples_per_slice` radial
/// samples (squared in 3-D). `tol` is the slack allowed between the claimed
/// `c` and the measured fraction.
pub fn verify_essential(
    spec: &DomainSpec,
    tube: &Tube,
    n_slices: usize,
    samples_per_slice: usize,
    tol: f64,
) -> Result<TubeCheck> {
    spec.validate()?;
    let n = spec.dim();
    if tube.base.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tube.base.dim() });
    }
    if n_slices < 2 || samples_per_slice < 2 {
        return Err(Error::InvalidParam("need at least 2 slices and 2 samples".into()));
    }
    if !(tube.l > 0.0 && tube.r > 0.0 && tube.c > 0.0 && tube.c <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "tube parameters out of range: l={}, r={}, c={}",
            tube.l, tube.r, tube.c
        )));
    }
    let bbox = spec.bounding_box();
    let taabb = tube.aabb();
    if (0..n).any(|a| taabb.hi[a] < bbox.lo[a] || taabb.lo[a] > bbox.hi[a]) {
        return Err(Error::EmptyTubeIntersection);
    }

    let compiled = spec.compile();
    let (ls, ss) = (n_slices, samples_per_slice);
    let h_t = tube.l / ls as f64;
    let h_u = 2.0 * tube.r / ss as f64;
    let coord = |k: usize| -tube.r + (k as f64 + 0.5) * h_u;

    // Transverse sample positions inside the disk (all of them in the plane).
    let mut disk: Vec<(usize, usize, f64, f64)> = Vec::new();
    if n == 2 {
        for k in 0..ss {
            disk.push((k, 0, coord(k), 0.0));
        }
    } else {
        for k in 0..ss {
            for m in 0..ss {
                let (u, v) = (coord(k), coord(m));
                if u * u + v * v < tube.r * tube.r {
                    disk.push((k, m, u, v));
                }
            }
        }
    }
    let per_slice = disk.len();
    if per_slice == 0 {
        return Err(Error::InvalidParam("no transverse samples inside the tube".into()));
    }

    // Interior membership raster in local (slice, k, m) coordinates.
    let stride = ss * ss;
    let mut mask = vec![false; ls * stride];
    let mut any = false;
    for i in 0..ls {
        let t = (i as f64 + 0.5) * h_t;
        for &(k, m, u, v) in &disk {
            let p = tube.world(t, u, v)?;
            if compiled.contains(&p) {
                mask[i * stride + k * ss + m] = true;
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::EmptyTubeIntersection);
    }

    // Flood fill with axis adjacency in local coordinates.
    let mut label = vec![usize::MAX; mask.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    let dims = [ls, ss, ss];
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        sizes.push(0usize);
        label[start] = id;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            sizes[id] += 1;
            let c = [cell / stride, (cell % stride) / ss, cell % ss];
            for a in 0..3 {
                for d in [-1i64, 1] {
                    let t = c[a] as i64 + d;
                    if t < 0 || t >= dims[a] as i64 {
                        continue;
                    }
                    let mut nc = c;
                    nc[a] = t as usize;
                    let ni = nc[0] * stride + nc[1] * ss + nc[2];
                    if mask[ni] && label[ni] == usize::MAX {
                        label[ni] = id;
                        stack.push(ni);
                    }
                }
            }
        }
    }
    let chosen = (0..sizes.len()).max_by_key(|&i| sizes[i]).expect("nonempty");

    // Minimal slice fraction of the chosen component.
    let mut c_hat = f64::INFINITY;
    for i in 0..ls {
        let hits = disk
            .iter()
            .filter(|&&(k, m, _, _)| label[i * stride + k * ss + m] == chosen)
            .count();
        c_hat = c_hat.min(hits as f64 / per_slice as f64);
    }

    // Wall leak test: outward-offset wall samples must all be outside.
    let wall_r = tube.r * (1.0 + WALL_EPS);
    let mut wall_clear = true;
    'outer: for i in 0..ls {
        let t = (i as f64 + 0.5) * h_t;
        if n == 2 {
            for sgn in [-1.0, 1.0] {
                if compiled.contains(&tube.world(t, sgn * wall_r, 0.0)?) {
                    wall_clear = false;
                    break 'outer;
                }
            }
        } else {
            let q_angles = ss.max(8);
            for q in 0..q_angles {
                let phi = (q as f64 + 0.5) * std::f64::consts::TAU / q_angles as f64;
                let p = tube.world(t, wall_r * phi.cos(), wall_r * phi.sin())?;
                if compiled.contains(&p) {
                    wall_clear = false;
                    break 'outer;
                }
            }
        }
    }

    let ok = wall_clear && c_hat >= tube.c * (1.0 - tol);
    Ok(TubeCheck {
        c_hat,
        wall_clear,
        n_components: sizes.len(),
        component_cells: sizes[chosen],
        c_claimed: tube.c,
        ok,
    })
}

/// Classify the term series of a family at exponent `s`. The verified slice
/// fraction can be substituted per-tube via `c_override`.
pub fn family_series(family: &TubeFamily, s: f64, c_override: Option<&[f64]>) -> Result<SeriesReport> {
    if !(s >= 1.0) {
        return Err(Error::InvalidParam(format!(
            "series terms lower-bound the field mass only for s >= 1, got {s}"
        )));
    }
    let terms: Vec<f64> = family
        .series_params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = c_override.and_then(|o| o.get(i).copied()).unwrap_or(p.c);
            series_term(&TubeParams { c, ..*p }, s, family.n)
        })
        .collect();
    SeriesReport::classify(terms)
}

/// A divergence certificate: the verified family plus its classified series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub family: String,
    pub n: usize,
    pub s: f64,
    pub first_index: u32,
    pub checks: Vec<TubeCheck>,
    /// Per-term slice fraction actually used: min(claimed, measured*(1+tol)).
    pub c_used: Vec<f64>,
    pub components_disjoint: bool,
    pub series: SeriesReport,
    /// Always "not averaging" when construction succeeds.
    pub conclusion: String,
}

/// Verify every tube of the family, check pairwise component disjointness,
/// and classify the series. Returns the certificate if the series diverges
/// and everything verified; otherwise a `CertificateRefused` error naming the
/// first failure.
pub fn certify_not_averaging(
    spec: &DomainSpec,
    family: &TubeFamily,
    s: f64,
    n_slices: usize,
    samples_per_slice: usize,
    tol: f64,
) -> Result<Certificate> {
    if family.tubes.len() != family.series_params.len() {
        return Err(Error::InvalidParam(
            "family tube list and series parameters differ in length".into(),
        ));
    }
    let checks: Vec<Result<TubeCheck>> = family
        .tubes
        .par_iter()
        .map(|t| verify_essential(spec, t, n_slices, samples_per_slice, tol))
        .collect();
    let mut done = Vec::with_capacity(checks.len());
    for (i, ch) in checks.into_iter().enumerate() {
        let j = family.first_index as usize + i;
        let ch = ch.map_err(|e| {
            Error::CertificateRefused(format!("tube {j} failed verification: {e}"))
        })?;
        if !ch.ok {
            return Err(Error::CertificateRefused(format!(
                "tube {j} is not essential as claimed (wall_clear={}, c_hat={:.4}, claimed c={:.4})",
                ch.wall_clear, ch.c_hat, ch.c_claimed
            )));
        }
        done.push(ch);
    }

    if !components_disjoint(spec, family) {
        return Err(Error::CertificateRefused(
            "tube components are not pairwise disjoint".into(),
        ));
    }

    let c_used: Vec<f64> = family
        .series_params
        .iter()
        .zip(&done)
        .map(|(p, ch)| p.c.min(ch.c_hat * (1.0 + tol)))
        .collect();
    let series = family_series(family, s, Some(&c_used))?;
    if series.verdict != SeriesVerdict::Diverges {
        return Err(Error::CertificateRefused(format!(
            "term series does not diverge at s = {s} (verdict {:?}, tail ratios [{:.4}, {:.4}])",
            series.verdict, series.tail_ratio_min, series.tail_ratio_max
        )));
    }
    Ok(Certificate {
        family: family.name.clone(),
        n: family.n,
        s,
        first_index: family.first_index,
        checks: done,
        c_used,
        components_disjoint: true,
        series,
        conclusion: format!("domain is not L^{s}-averaging"),
    })
}

/// Sampled pairwise disjointness of tube components: for every pair of tubes
/// whose boxes overlap, probe a grid of points and report a conflict if some
/// interior point of the domain lies in both closed tubes.
pub fn components_disjoint(spec: &DomainSpec, family: &TubeFamily) -> bool {
    let compiled = spec.compile();
    let n = family.n;
    let probes = 9usize;
    for i in 0..family.tubes.len() {
        for j in (i + 1)..family.tubes.len() {
            let (a, b) = (&family.tubes[i], &family.tubes[j]);
            let (ba, bb) = (a.aabb(), b.aabb());
            let mut lo = [0.0; MAX_DIM];
            let mut hi = [0.0; MAX_DIM];
            let mut empty = false;
            for ax in 0..n {
                lo[ax] = ba.lo[ax].max(bb.lo[ax]);
                hi[ax] = ba.hi[ax].min(bb.hi[ax]);
                if lo[ax] > hi[ax] {
                    empty = true;
                    break;
                }
            }
            if empty {
                continue;
            }
            let steps = |ax: usize| {
                (0..probes).map(move |q| lo[ax] + (q as f64 + 0.5) * (hi[ax] - lo[ax]) / probes as f64)
            };
            for x in steps(0) {
                for y in steps(1) {
                    let zs: Vec<f64> = if n == 3 { steps(2).collect() } else { vec![0.0] };
                    for z in zs {
                        let p = if n == 2 { Point::new2(x, y) } else { Point::new3(x, y, z) };
                        if compiled.contains(&p) && a.contains(&p) && b.contains(&p) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Human-readable certificate artifact.
pub fn certificate_text(cert: &Certificate) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "divergence certificate: family {}", cert.family);
    let _ = writeln!(out, "dimension {}  exponent s = {}", cert.n, cert.s);
    let _ = writeln!(out, "conclusion: {}", cert.conclusion);
    let _ = writeln!(out, "components pairwise disjoint: {}", cert.components_disjoint);
    let _ = writeln!(out, "tubes (index: wall_clear, c_hat / c_claimed, cells):");
    for (off, ch) in cert.checks.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:3}: {} {:.6} / {:.6} {}",
            cert.first_index as usize + off,
            ch.wall_clear,
            ch.c_hat,
            ch.c_claimed,
            ch.component_cells
        );
    }
    let _ = writeln!(out, "series terms:");
    for (off, (t, ps)) in cert
        .series
        .terms
        .iter()
        .zip(&cert.series.partial_sums)
        .enumerate()
    {
        let _ = writeln!(
            out,
            "  {:3}: term {:.12e}  partial sum {:.12e}",
            cert.first_index as usize + off,
            t,
            ps
        );
    }
    let _ = writeln!(
        out,
        "tail ratios in [{:.6}, {:.6}]  verdict: {:?}",
        cert.series.tail_ratio_min, cert.series.tail_ratio_max, cert.series.verdict
    );
    let _ = writeln!(
        out,
        "rule: verified tubes with min slice fraction, wall-clear lateral boundary, disjoint components; divergent term series c r^n (l/r)^(s+1) implies unbounded normalized L^s means"
    );
    out
}

// ---------------------------------------------------------------------------
// Family builders
// ---------------------------------------------------------------------------

/// Vertical tubes through the rooms of the mirrored rooms-and-halls domain:
/// tube j spans the full width of room R_j between heights 1/2 and 3/4, so
/// its wall lies on the room's side walls.
pub fn rooms_halls_tubes(j_count: u32) -> TubeFamily {
    let mut tubes = Vec::new();
    let mut series_params = Vec::new();
    for j in 1..=j_count {
        let r = 0.5f64.powi(j as i32 + 3);
        let mid = 0.5 * (crate::geom::rh_xp(j) + crate::geom::rh_x(j + 1));
        tubes.push(Tube {
            base: Point::new2(mid, 0.5),
            axis: Point::new2(0.0, 1.0),
            l: 0.25,
            r,
            c: 1.0,
        });
        series_params.push(TubeParams { l: 0.25, r, c: 1.0 });
    }
    TubeFamily {
        name: "rooms_and_halls".into(),
        n: 2,
        first_index: 1,
        tubes,
        series_params,
    }
}

/// Radial tubes over the chords of the disk-and-rooms domain: tube j stands
/// on chord z_j z_{j+1} and reaches the circle of radius 2 (the rooms extend
/// to radius 3, so the far end is interior to the room and the wall runs
/// through the gaps between rooms). Series parameters use the conservative
/// estimates r_j = pi / 2^{j+1}, l_j = 1, c = 1, each of which only lowers
/// the terms for s >= 1.
pub fn disk_rooms_tubes(j_count: u32) -> TubeFamily {
    let mut tubes = Vec::new();
    let mut series_params = Vec::new();
    for j in 1..=j_count {
        let f = RectFrame::disk_room(j, 2.0);
        let base = Point::new2(
            f.base[0] + 0.5 * f.len * f.u[0],
            f.base[1] + 0.5 * f.len * f.u[1],
        );
        tubes.push(Tube {
            base,
            axis: Point::new2(f.v[0], f.v[1]),
            l: f.height,
            r: 0.5 * f.len,
            c: 1.0,
        });
        series_params.push(TubeParams {
            l: 1.0,
            r: std::f64::consts::PI * 0.5f64.powi(j as i32 + 1),
            c: 1.0,
        });
    }
    TubeFamily {
        name: "disk_and_rooms".into(),
        n: 2,
        first_index: 1,
        tubes,
        series_params,
    }
}

/// Axial tubes in the power cusp over dyadic windows [2^{-j}, 2^{-j+1}] with
/// radius matching the wide end: r_j = 2^{alpha(1-j)}, l_j = 2^{-j}, and the
/// conservative slice fraction c = 2^{-alpha n}.
pub fn cusp_tubes(alpha: f64, n: usize, j_count: u32) -> TubeFamily {
    let mut tubes = Vec::new();
    let mut series_params = Vec::new();
    let c = (2f64).powf(-alpha * n as f64);
    for j in 1..=j_count {
        let a = 0.5f64.powi(j as i32);
        let b = 0.5f64.powi(j as i32 - 1);
        let r = b.powf(alpha);
        let base = if n == 2 {
            Point::new2(a, 0.0)
        } else {
            Point::new3(a, 0.0, 0.0)
        };
        let axis = if n == 2 {
            Point::new2(1.0, 0.0)
        } else {
            Point::new3(1.0, 0.0, 0.0)
        };
        tubes.push(Tube { base, axis, l: b - a, r, c });
        series_params.push(TubeParams { l: b - a, r, c });
    }
    TubeFamily {
        name: format!("cusp_alpha_{alpha}"),
        n,
        first_index: 1,
        tubes,
        series_params,
    }
}

/// One vertical tube per block generation j (blocks 2^j .. 2^{j+1}-1, all of
/// edge 3^{-j}), spanning the generation's full height (2/3)^j. In the plane
/// the tube is the full column (radius = half edge; wall on the side walls,
/// worst slice the contact face with the next generation: c = 1/3). In space
/// the wall must clear the square section, so the radius is the half-diagonal
/// and the worst slice fraction is (edge/3)^2 / (pi r^2) = 2 / (9 pi).
pub fn block_tubes(n: usize, j_count: u32) -> TubeFamily {
    let (c1, c2) = if n == 2 {
        (0.5, 1.0 / 3.0)
    } else {
        (std::f64::consts::SQRT_2 / 2.0, 2.0 / (9.0 * std::f64::consts::PI))
    };
    let mut tubes = Vec::new();
    let mut series_params = Vec::new();
    for j in 0..j_count {
        let edge = crate::geom::block_edge(1u32 << j);
        let bottom = if j == 0 {
            0.0
        } else {
            crate::geom::block_top((1u32 << j) - 1)
        };
        let l = (2.0f64 / 3.0).powi(j as i32);
        let r = c1 * edge;
        let (base, axis) = if n == 2 {
            (Point::new2(0.5, bottom), Point::new2(0.0, 1.0))
        } else {
            (Point::new3(0.5, 0.5, bottom), Point::new3(0.0, 0.0, 1.0))
        };
        tubes.push(Tube { base, axis, l, r, c: c2 });
        series_params.push(TubeParams { l, r, c: c2 });
    }
    TubeFamily {
        name: "block_tower".into(),
        n,
        first_index: 0,
        tubes,
        series_params,
    }
}
