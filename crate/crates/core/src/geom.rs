//! Domain catalog: points, axis-aligned boxes, and the family of planar/spatial
//! test domains (cube, ball, power cusp, rooms-and-halls, disk-and-rooms,
//! block tower, box unions and translated unions).
//!
//! Membership is *interior-exact*: `contains` returns true exactly on the
//! interior of the realized point set, including interior points of shared
//! faces in box unions. All catalog shapes live in dimension 2 or 3.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Highest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// A point in R^2 or R^3. The third coordinate is zero when `dim == 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new2(x: f64, y: f64) -> Self {
        Point { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point { coords: [x, y, z], dim: 3 }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        match c.len() {
            2 => Ok(Point::new2(c[0], c[1])),
            3 => Ok(Point::new3(c[0], c[1], c[2])),
            got => Err(Error::DimensionMismatch { expected: 2, got }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Raw fixed-size storage (third entry is 0 for planar points).
    pub fn raw(&self) -> [f64; MAX_DIM] {
        self.coords
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn z(&self) -> f64 {
        self.coords[2]
    }

    pub fn get(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    pub fn translated(&self, shift: &Point) -> Point {
        let mut c = self.coords;
        for a in 0..self.dim {
            c[a] += shift.coords[a];
        }
        Point { coords: c, dim: self.dim }
    }

    pub fn norm(&self) -> f64 {
        self.coords()
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim.max(other.dim) {
            let d = self.coords[a] - other.coords[a];
            s += d * d;
        }
        s.sqrt()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        (0..self.dim.max(other.dim))
            .map(|a| self.coords[a] * other.coords[a])
            .sum()
    }

    pub fn sub(&self, other: &Point) -> Point {
        let mut c = self.coords;
        for a in 0..self.dim {
            c[a] -= other.coords[a];
        }
        Point { coords: c, dim: self.dim }
    }

    pub fn add_scaled(&self, dir: &Point, t: f64) -> Point {
        let mut c = self.coords;
        for a in 0..self.dim {
            c[a] += t * dir.coords[a];
        }
        Point { coords: c, dim: self.dim }
    }

    pub fn scaled(&self, t: f64) -> Point {
        let mut c = self.coords;
        for v in &mut c {
            *v *= t;
        }
        Point { coords: c, dim: self.dim }
    }

    /// Unit vector in this direction; errors on (near-)zero vectors.
    pub fn unit(&self) -> Result<Point> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidParam("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Cross product (3-D; planar points are treated as z = 0).
    pub fn cross(&self, other: &Point) -> Point {
        let a = self.coords;
        let b = other.coords;
        Point {
            coords: [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ],
            dim: 3,
        }
    }

    /// Counterclockwise quarter turn in the plane.
    pub fn perp2(&self) -> Point {
        Point::new2(-self.coords[1], self.coords[0])
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::from_slice(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords().to_vec()
    }
}

/// Closed axis-aligned box, stored as per-axis `[lo, hi]` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedBox {
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub dim: usize,
}

impl AlignedBox {
    pub fn new2(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        AlignedBox { lo: [x0, y0, 0.0], hi: [x1, y1, 0.0], dim: 2 }
    }

    pub fn new3(x0: f64, y0: f64, z0: f64, x1: f64, y1: f64, z1: f64) -> Self {
        AlignedBox { lo: [x0, y0, z0], hi: [x1, y1, z1], dim: 3 }
    }

    pub fn contains_closed(&self, p: &Point) -> bool {
        (0..self.dim).all(|a| self.lo[a] <= p.coords[a] && p.coords[a] <= self.hi[a])
    }

    pub fn contains_open(&self, p: &Point) -> bool {
        (0..self.dim).all(|a| self.lo[a] < p.coords[a] && p.coords[a] < self.hi[a])
    }

    /// Whether, locally at `p` (which must lie in the closed box), the box
    /// admits motion in the diagonal direction encoded by `sig` (bit a set =
    /// positive direction along axis a). Holds iff on every axis the point can
    /// move an epsilon that way without leaving the box.
    fn admits(&self, p: &Point, sig: u32) -> bool {
        for a in 0..self.dim {
            let c = p.coords[a];
            let ok = if sig & (1 << a) != 0 {
                self.lo[a] <= c && c < self.hi[a]
            } else {
                self.lo[a] < c && c <= self.hi[a]
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Exact Euclidean distance from an interior point to the box boundary.
    pub fn boundary_dist(&self, p: &Point) -> f64 {
        (0..self.dim)
            .map(|a| (p.coords[a] - self.lo[a]).min(self.hi[a] - p.coords[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.hi[a] - self.lo[a])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn union_with(&self, other: &AlignedBox) -> AlignedBox {
        let mut b = *self;
        for a in 0..self.dim {
            b.lo[a] = b.lo[a].min(other.lo[a]);
            b.hi[a] = b.hi[a].max(other.hi[a]);
        }
        b
    }

    pub fn translated(&self, shift: &Point) -> AlignedBox {
        let mut b = *self;
        for a in 0..self.dim {
            b.lo[a] += shift.raw()[a];
            b.hi[a] += shift.raw()[a];
        }
        b
    }
}

/// A point `p` in the closed union is interior to the union of closed boxes
/// iff every diagonal direction in `{-1,+1}^dim` is admitted by some box
/// containing `p`. Directions with zero components are covered by whichever
/// diagonal shares their nonzero signs, so checking the 2^dim diagonals is
/// exact.
pub fn box_union_interior(boxes: &[AlignedBox], p: &Point, dim: usize) -> bool {
    let nsig = 1u32 << dim;
    'sig: for sig in 0..nsig {
        for b in boxes {
            if b.admits(p, sig) {
                continue 'sig;
            }
        }
        return false;
    }
    true
}

/// One translated member of a union domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionPart {
    pub spec: DomainSpec,
    pub shift: Point,
}

/// The domain catalog. Every variant denotes an open, bounded set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Open unit cube (0,1)^n.
    UnitCube { n: usize },
    /// Open unit ball {|z| < 1}.
    UnitBall { n: usize },
    /// Power cusp {0 < x < 1, |(y_1..y_{n-1})| < x^alpha}, alpha > 1.
    Cusp { alpha: f64, n: usize },
    /// Planar rooms-and-halls domain, rooms R_0..R_{j_max} of full height
    /// joined by halls H_1..H_{j_max} of factorially shrinking height,
    /// mirrored through the y-axis.
    RoomsAndHalls { j_max: u32 },
    /// Unit disk with j_max rectangular rooms attached along chords of the
    /// unit circle, extruded radially out to the circle of radius 3.
    DiskAndRooms { j_max: u32 },
    /// Tower of axis-aligned cubes: block 1 is the unit cube; blocks
    /// 2^j..2^{j+1}-1 have edge 3^{-j} and stack centered above one another.
    BlockTower { n: usize, m_max: u32 },
    /// Interior of a finite union of closed axis-aligned boxes.
    BoxUnion { n: usize, boxes: Vec<AlignedBox> },
    /// Union of translated member domains (open union; membership is true iff
    /// true in any translated member).
    UnionOf { parts: Vec<UnionPart> },
}

/// Rooms-and-halls landmark: x_j = 1 - 2^{-j}.
pub fn rh_x(j: u32) -> f64 {
    1.0 - 0.5f64.powi(j as i32)
}

/// Rooms-and-halls landmark: x'_j = x_j + 2^{-(j+2)} for j >= 1, x'_0 = 0.
pub fn rh_xp(j: u32) -> f64 {
    if j == 0 {
        0.0
    } else {
        rh_x(j) + 0.5f64.powi(j as i32 + 2)
    }
}

/// Height of hall H_j: 1/(j+1)!.
pub fn rh_hall_height(j: u32) -> f64 {
    1.0 / factorial(j + 1)
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0f64, |acc, i| acc * i as f64)
}

/// Disk-and-rooms chord angle theta_j = (1 - 2^{1-j}) pi, j >= 1.
pub fn dr_theta(j: u32) -> f64 {
    (1.0 - 0.5f64.powi(j as i32 - 1)) * std::f64::consts::PI
}

/// Disk-and-rooms chord endpoint z_j on the unit circle.
pub fn dr_vertex(j: u32) -> Point {
    let t = dr_theta(j);
    Point::new2(t.cos(), t.sin())
}

/// Edge length of tower block m: 3^{-floor(log2 m)}.
pub fn block_edge(m: u32) -> f64 {
    3.0f64.powi(-(m.ilog2() as i32))
}

/// Height of the top face of block m (blocks stacked from y=0 upward).
pub fn block_top(m: u32) -> f64 {
    (1..=m).map(block_edge).sum()
}

/// Oriented rectangle frame for a disk-and-rooms room: the chord from
/// `base` spans `len` along `u`; the rectangle extends `height` along the
/// outward normal `v`.
#[derive(Clone, Copy, Debug)]
pub struct RectFrame {
    pub base: [f64; 2],
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub len: f64,
    pub height: f64,
}

impl RectFrame {
    /// Room rectangle on chord z_j z_{j+1}, extruded radially until its outer
    /// vertices lie on the circle of the given radius.
    pub fn disk_room(j: u32, outer_radius: f64) -> RectFrame {
        let a = dr_vertex(j);
        let b = dr_vertex(j + 1);
        let dx = b.x() - a.x();
        let dy = b.y() - a.y();
        let len = (dx * dx + dy * dy).sqrt();
        let u = [dx / len, dy / len];
        // Outward normal: chord endpoints are on the unit circle, so the
        // normal pointing away from the origin has positive dot with z_j.
        let mut v = [u[1], -u[0]];
        if v[0] * a.x() + v[1] * a.y() < 0.0 {
            v = [-v[0], -v[1]];
        }
        // |z_j + H v|^2 = 1 + 2 H (z_j . v) + H^2 = outer_radius^2.
        let zv = a.x() * v[0] + a.y() * v[1];
        let height = -zv + (zv * zv + (outer_radius * outer_radius - 1.0)).sqrt();
        RectFrame { base: [a.x(), a.y()], u, v, len, height }
    }

    pub fn local(&self, p: &Point) -> (f64, f64) {
        let dx = p.x() - self.base[0];
        let dy = p.y() - self.base[1];
        (dx * self.u[0] + dy * self.u[1], dx * self.v[0] + dy * self.v[1])
    }

    pub fn contains_open(&self, p: &Point) -> bool {
        let (s, t) = self.local(p);
        0.0 < s && s < self.len && 0.0 < t && t < self.height
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let c = |s: f64, t: f64| {
            [
                self.base[0] + s * self.u[0] + t * self.v[0],
                self.base[1] + s * self.u[1] + t * self.v[1],
            ]
        };
        [c(0.0, 0.0), c(self.len, 0.0), c(self.len, self.height), c(0.0, self.height)]
    }
}

/// Membership-ready compiled form of a `DomainSpec` (box lists and frames are
/// materialized once, so per-point queries are cheap).
pub struct CompiledDomain {
    dim: usize,
    shape: CompiledShape,
}

enum CompiledShape {
    UnitCube,
    UnitBall,
    Cusp { alpha: f64, x_min: f64 },
    Boxes { boxes: Vec<AlignedBox>, single: bool },
    DiskRooms { rects: Vec<RectFrame> },
    Union { parts: Vec<(CompiledDomain, Point)> },
}

impl CompiledDomain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior-exact membership.
    pub fn contains(&self, p: &Point) -> bool {
        match &self.shape {
            CompiledShape::UnitCube => (0..self.dim).all(|a| {
                let c = p.raw()[a];
                0.0 < c && c < 1.0
            }),
            CompiledShape::UnitBall => {
                let mut s = 0.0;
                for a in 0..self.dim {
                    s += p.raw()[a] * p.raw()[a];
                }
                s < 1.0
            }
            CompiledShape::Cusp { alpha, x_min } => {
                let x = p.x();
                if x <= *x_min || x >= 1.0 {
                    return false;
                }
                let r2: f64 = (1..self.dim).map(|a| p.raw()[a] * p.raw()[a]).sum();
                r2.sqrt() < x.powf(*alpha)
            }
            CompiledShape::Boxes { boxes, single } => {
                if *single {
                    boxes[0].contains_open(p)
                } else {
                    box_union_interior(boxes, p, self.dim)
                }
            }
            CompiledShape::DiskRooms { rects } => {
                if p.x() * p.x() + p.y() * p.y() < 1.0 {
                    return true;
                }
                rects.iter().any(|r| r.contains_open(p))
            }
            CompiledShape::Union { parts } => parts.iter().any(|(part, shift)| {
                let mut q = p.raw();
                for a in 0..self.dim {
                    q[a] -= shift.raw()[a];
                }
                let q = Point { coords: q, dim: self.dim };
                part.contains(&q)
            }),
        }
    }

    /// Closed-form upper bound on the distance from an interior point to the
    /// domain boundary, where one is available. Used to clamp the raster
    /// distance transform.
    pub fn analytic_dist_bound(&self, p: &Point) -> Option<f64> {
        match &self.shape {
            CompiledShape::UnitCube => Some(
                (0..self.dim)
                    .map(|a| p.raw()[a].min(1.0 - p.raw()[a]))
                    .fold(f64::INFINITY, f64::min),
            ),
            CompiledShape::UnitBall => {
                let mut s = 0.0;
                for a in 0..self.dim {
                    s += p.raw()[a] * p.raw()[a];
                }
                Some(1.0 - s.sqrt())
            }
            CompiledShape::Cusp { alpha, .. } => {
                let x = p.x();
                let r2: f64 = (1..self.dim).map(|a| p.raw()[a] * p.raw()[a]).sum();
                // Nearest wall is no farther than straight out to the cusp
                // curve, or straight ahead to the end cap.
                Some((x.powf(*alpha) - r2.sqrt()).min(1.0 - x))
            }
            CompiledShape::Boxes { boxes, single } if *single => {
                Some(boxes[0].boundary_dist(p))
            }
            _ => None,
        }
    }
}

/// What the resolution policy removed from a spec before rasterization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationNote {
    /// Upper bound on the measure of the dropped features.
    pub dropped_measure: f64,
    /// Human-readable description of each dropped feature class.
    pub dropped: Vec<String>,
}

impl TruncationNote {
    fn merge(&mut self, other: TruncationNote) {
        self.dropped_measure += other.dropped_measure;
        self.dropped.extend(other.dropped);
    }
}

/// Restriction region used by the truncation axis of refinement sweeps: the
/// field is integrated only over cells inside the stage region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StageRegion {
    /// Whole domain (families without an infinite feature sequence).
    All,
    /// Cusp: keep x >= x_min; deeper stages cut closer to the tip.
    XAtLeast { x_min: f64 },
    /// Rooms-and-halls: keep |x| <= abs_x_max (rooms up to the stage index).
    AbsXAtMost { abs_x_max: f64 },
    /// Block tower: keep height <= y_max (whole generations of blocks).
    LastAxisAtMost { y_max: f64, axis: usize },
}

impl StageRegion {
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            StageRegion::All => true,
            StageRegion::XAtLeast { x_min } => p.x() >= *x_min,
            StageRegion::AbsXAtMost { abs_x_max } => p.x().abs() <= *abs_x_max,
            StageRegion::LastAxisAtMost { y_max, axis } => p.raw()[*axis] <= *y_max,
        }
    }
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::UnitCube { n }
            | DomainSpec::UnitBall { n }
            | DomainSpec::Cusp { n, .. }
            | DomainSpec::BlockTower { n, .. }
            | DomainSpec::BoxUnion { n, .. } => *n,
            DomainSpec::RoomsAndHalls { .. } | DomainSpec::DiskAndRooms { .. } => 2,
            DomainSpec::UnionOf { parts } => {
                parts.first().map(|p| p.spec.dim()).unwrap_or(2)
            }
        }
    }

    /// Validate parameters (dimension range, alpha > 1, nonempty parts...).
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidParam(format!("dimension must be 2 or 3, got {n}")));
        }
        match self {
            DomainSpec::Cusp { alpha, .. } => {
                if !(*alpha > 1.0) {
                    return Err(Error::InvalidParam(format!(
                        "cusp exponent must exceed 1, got {alpha}"
                    )));
                }
            }
            DomainSpec::RoomsAndHalls { j_max } | DomainSpec::DiskAndRooms { j_max } => {
                if *j_max < 1 {
                    return Err(Error::InvalidParam("j_max must be >= 1".into()));
                }
            }
            DomainSpec::BlockTower { m_max, .. } => {
                if *m_max < 1 {
                    return Err(Error::InvalidParam("m_max must be >= 1".into()));
                }
            }
            DomainSpec::BoxUnion { n, boxes } => {
                if boxes.is_empty() {
                    return Err(Error::InvalidParam("box union needs at least one box".into()));
                }
                for b in boxes {
                    if b.dim != *n {
                        return Err(Error::DimensionMismatch { expected: *n, got: b.dim });
                    }
                    if (0..*n).any(|a| !(b.lo[a] < b.hi[a])) {
                        return Err(Error::InvalidParam(format!("degenerate box {b:?}")));
                    }
                }
            }
            DomainSpec::UnionOf { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidParam("union needs at least one part".into()));
                }
                for p in parts {
                    p.spec.validate()?;
                    if p.spec.dim() != n || p.shift.dim() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: p.spec.dim(),
                        });
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Interior-exact membership for a single query point.
    pub fn contains(&self, p: &Point) -> Result<bool> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        Ok(self.compile().contains(p))
    }

    /// Materialize box lists / frames for fast repeated membership queries.
    pub fn compile(&self) -> CompiledDomain {
        let dim = self.dim();
        let shape = match self {
            DomainSpec::UnitCube { .. } => CompiledShape::UnitCube,
            DomainSpec::UnitBall { .. } => CompiledShape::UnitBall,
            DomainSpec::Cusp { alpha, .. } => CompiledShape::Cusp { alpha: *alpha, x_min: 0.0 },
            DomainSpec::RoomsAndHalls { j_max } => CompiledShape::Boxes {
                boxes: rooms_and_halls_boxes(*j_max),
                single: false,
            },
            DomainSpec::DiskAndRooms { j_max } => CompiledShape::DiskRooms {
                rects: (1..=*j_max).map(|j| RectFrame::disk_room(j, 3.0)).collect(),
            },
            DomainSpec::BlockTower { n, m_max } => CompiledShape::Boxes {
                boxes: block_tower_boxes(*n, *m_max),
                single: *m_max == 1,
            },
            DomainSpec::BoxUnion { boxes, .. } => CompiledShape::Boxes {
                boxes: boxes.clone(),
                single: boxes.len() == 1,
            },
            DomainSpec::UnionOf { parts } => CompiledShape::Union {
                parts: parts
                    .iter()
                    .map(|p| (p.spec.compile(), p.shift))
                    .collect(),
            },
        };
        CompiledDomain { dim, shape }
    }

    /// Tight axis-aligned bounding box of the domain.
    pub fn bounding_box(&self) -> AlignedBox {
        match self {
            DomainSpec::UnitCube { n } => unit_box(*n),
            DomainSpec::UnitBall { n } => {
                let mut b = unit_box(*n);
                for a in 0..*n {
                    b.lo[a] = -1.0;
                    b.hi[a] = 1.0;
                }
                b
            }
            DomainSpec::Cusp { n, .. } => {
                let mut b = unit_box(*n);
                for a in 1..*n {
                    b.lo[a] = -1.0;
                    b.hi[a] = 1.0;
                }
                b
            }
            DomainSpec::RoomsAndHalls { j_max } => {
                let xr = rh_x(*j_max + 1);
                AlignedBox::new2(-xr, 0.0, xr, 1.0)
            }
            DomainSpec::DiskAndRooms { .. } => AlignedBox::new2(-3.0, -3.0, 3.0, 3.0),
            DomainSpec::BlockTower { n, m_max } => {
                let mut b = unit_box(*n);
                b.hi[*n - 1] = block_top(*m_max);
                b
            }
            DomainSpec::BoxUnion { boxes, .. } => boxes
                .iter()
                .skip(1)
                .fold(boxes[0], |acc, b| acc.union_with(b)),
            DomainSpec::UnionOf { parts } => parts
                .iter()
                .map(|p| p.spec.bounding_box().translated(&p.shift))
                .reduce(|a, b| a.union_with(&b))
                .expect("validated union is nonempty"),
        }
    }

    /// Apply the feature-resolution policy: drop features whose smallest
    /// dimension is below `2h`, returning the effective spec and a note with
    /// an upper bound on the dropped measure.
    pub fn truncated(&self, h: f64) -> (DomainSpec, TruncationNote) {
        let cut = 2.0 * h;
        match self {
            DomainSpec::UnitCube { .. } | DomainSpec::UnitBall { .. } => {
                (self.clone(), TruncationNote::default())
            }
            DomainSpec::Cusp { alpha, n } => {
                // The tip is unresolvable where the full width 2 x^alpha
                // falls below 2h, i.e. x < h^{1/alpha}.
                let x_min = h.powf(1.0 / *alpha);
                let dropped_measure = cusp_tip_measure(*alpha, *n, x_min);
                let note = TruncationNote {
                    dropped_measure,
                    dropped: vec![format!("cusp tip x < {x_min:.6e}")],
                };
                (self.clone(), note)
            }
            DomainSpec::RoomsAndHalls { j_max } => {
                let mut j_eff = *j_max;
                for j in 1..=*j_max {
                    let width = 0.5f64.powi(j as i32 + 2);
                    if width < cut || rh_hall_height(j) < cut {
                        j_eff = j - 1;
                        break;
                    }
                }
                let mut note = TruncationNote::default();
                for j in (j_eff + 1)..=*j_max {
                    let width = 0.5f64.powi(j as i32 + 2);
                    // Mirrored pair of room (height 1) and hall.
                    note.dropped_measure += 2.0 * width * (1.0 + rh_hall_height(j));
                    note.dropped.push(format!("room/hall pair j={j}"));
                }
                (DomainSpec::RoomsAndHalls { j_max: j_eff }, note)
            }
            DomainSpec::DiskAndRooms { j_max } => {
                let mut j_eff = *j_max;
                for j in 1..=*j_max {
                    let f = RectFrame::disk_room(j, 3.0);
                    if f.len.min(f.height) < cut {
                        j_eff = j - 1;
                        break;
                    }
                }
                let mut note = TruncationNote::default();
                for j in (j_eff + 1)..=*j_max {
                    let f = RectFrame::disk_room(j, 3.0);
                    note.dropped_measure += f.len * f.height;
                    note.dropped.push(format!("disk room j={j}"));
                }
                (DomainSpec::DiskAndRooms { j_max: j_eff.max(1) }, note)
            }
            DomainSpec::BlockTower { n, m_max } => {
                let mut m_eff = *m_max;
                for m in 1..=*m_max {
                    if block_edge(m) < cut {
                        m_eff = m - 1;
                        break;
                    }
                }
                let mut note = TruncationNote::default();
                for m in (m_eff + 1)..=*m_max {
                    note.dropped_measure += block_edge(m).powi(*n as i32);
                    note.dropped.push(format!("tower block m={m}"));
                }
                (DomainSpec::BlockTower { n: *n, m_max: m_eff.max(1) }, note)
            }
            DomainSpec::BoxUnion { n, boxes } => {
                let (kept, dropped): (Vec<&AlignedBox>, Vec<&AlignedBox>) =
                    boxes.iter().partition(|b| b.min_side() >= cut);
                let mut note = TruncationNote::default();
                for b in &dropped {
                    note.dropped_measure += b.volume();
                    note.dropped.push(format!("box {:?}..{:?}", &b.lo[..*n], &b.hi[..*n]));
                }
                let kept = if kept.is_empty() {
                    boxes.clone()
                } else {
                    kept.into_iter().copied().collect()
                };
                (DomainSpec::BoxUnion { n: *n, boxes: kept }, note)
            }
            DomainSpec::UnionOf { parts } => {
                let mut note = TruncationNote::default();
                let parts = parts
                    .iter()
                    .map(|p| {
                        let (spec, n2) = p.spec.truncated(h);
                        note.merge(n2);
                        UnionPart { spec, shift: p.shift }
                    })
                    .collect();
                (DomainSpec::UnionOf { parts }, note)
            }
        }
    }

    /// Spec deep enough to contain every sweep stage up to `depth`.
    pub fn with_sweep_depth(&self, depth: u32) -> DomainSpec {
        match self {
            DomainSpec::RoomsAndHalls { .. } => DomainSpec::RoomsAndHalls { j_max: depth.max(1) },
            DomainSpec::BlockTower { n, .. } => DomainSpec::BlockTower {
                n: *n,
                m_max: (1u32 << depth).saturating_sub(1).max(1),
            },
            DomainSpec::DiskAndRooms { .. } => DomainSpec::DiskAndRooms { j_max: depth.max(1) },
            other => other.clone(),
        }
    }

    /// Integration region for one truncation stage of a refinement sweep.
    /// Deeper stages contain shallower ones, so partial integrals along the
    /// stage axis are nondecreasing by construction.
    pub fn sweep_stage(&self, depth: u32) -> StageRegion {
        match self {
            // Geometric tip cuts, half a dyadic scale per stage: stage t keeps
            // x >= 2^{-t/2}. Chosen so a handful of stages stays resolvable on
            // practical grids while increments still scale geometrically.
            DomainSpec::Cusp { .. } => StageRegion::XAtLeast {
                x_min: 2f64.powf(-(depth as f64) / 2.0),
            },
            DomainSpec::RoomsAndHalls { .. } => StageRegion::AbsXAtMost {
                abs_x_max: rh_x(depth + 1),
            },
            DomainSpec::BlockTower { n, .. } => StageRegion::LastAxisAtMost {
                y_max: block_top((1u32 << depth).saturating_sub(1).max(1)),
                axis: *n - 1,
            },
            _ => StageRegion::All,
        }
    }
}

fn unit_box(n: usize) -> AlignedBox {
    if n == 2 {
        AlignedBox::new2(0.0, 0.0, 1.0, 1.0)
    } else {
        AlignedBox::new3(0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    }
}

/// Measure of the cusp tip {0 < x < x_min}: integral of V_{n-1} x^{alpha(n-1)}.
pub fn cusp_tip_measure(alpha: f64, n: usize, x_min: f64) -> f64 {
    let e = alpha * (n as f64 - 1.0);
    let vol = if n == 2 { 2.0 } else { std::f64::consts::PI };
    vol * x_min.powf(e + 1.0) / (e + 1.0)
}

/// Closed boxes for the (mirrored) rooms-and-halls construction.
pub fn rooms_and_halls_boxes(j_max: u32) -> Vec<AlignedBox> {
    let mut boxes = Vec::new();
    for j in 0..=j_max {
        let b = AlignedBox::new2(rh_xp(j), 0.0, rh_x(j + 1), 1.0);
        boxes.push(b);
        boxes.push(AlignedBox::new2(-b.hi[0], 0.0, -b.lo[0], 1.0));
    }
    for j in 1..=j_max {
        let b = AlignedBox::new2(rh_x(j), 0.0, rh_xp(j), rh_hall_height(j));
        boxes.push(b);
        boxes.push(AlignedBox::new2(-b.hi[0], 0.0, -b.lo[0], b.hi[1]));
    }
    boxes
}

/// Closed boxes for the block tower (blocks 1..=m_max stacked on y/z axis).
pub fn block_tower_boxes(n: usize, m_max: u32) -> Vec<AlignedBox> {
    let mut boxes = Vec::with_capacity(m_max as usize);
    let mut bottom = 0.0;
    for m in 1..=m_max {
        let a = block_edge(m);
        let lo_side = 0.5 - a / 2.0;
        let hi_side = 0.5 + a / 2.0;
        let b = if n == 2 {
            AlignedBox::new2(lo_side, bottom, hi_side, bottom + a)
        } else {
            AlignedBox::new3(lo_side, lo_side, bottom, hi_side, hi_side, bottom + a)
        };
        boxes.push(b);
        bottom += a;
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(x: f64, y: f64) -> Point {
        Point::new2(x, y)
    }

    #[test]
    fn unit_cube_membership() {
        let d = DomainSpec::UnitCube { n: 2 };
        assert!(d.contains(&p2(0.5, 0.5)).unwrap());
        assert!(!d.contains(&p2(0.5, 1.0)).unwrap(), "boundary is excluded");
        assert!(!d.contains(&p2(-0.1, 0.5)).unwrap());
        let d3 = DomainSpec::UnitCube { n: 3 };
        assert!(d3.contains(&Point::new3(0.1, 0.9, 0.5)).unwrap());
        assert!(d3.contains(&p2(0.5, 0.5)).is_err(), "dimension mismatch");
    }

    #[test]
    fn cusp_membership() {
        let d = DomainSpec::Cusp { alpha: 2.0, n: 3 };
        // |y| = 0.2 < 0.5^2 = 0.25.
        assert!(d.contains(&Point::new3(0.5, 0.2, 0.0)).unwrap());
        assert!(!d.contains(&Point::new3(0.5, 0.25, 0.0)).unwrap());
        assert!(!d.contains(&Point::new3(0.0, 0.0, 0.0)).unwrap());
        let d2 = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        assert!(d2.contains(&p2(0.5, 0.12)).unwrap());
        assert!(!d2.contains(&p2(0.5, 0.126)).unwrap());
    }

    #[test]
    fn rooms_and_halls_landmarks() {
        assert_eq!(rh_x(1), 0.5);
        assert_eq!(rh_xp(1), 0.5 + 0.125);
        assert_eq!(rh_xp(0), 0.0);
        assert_eq!(rh_hall_height(1), 0.5);
        assert_eq!(rh_hall_height(3), 1.0 / 24.0);
    }

    #[test]
    fn rooms_and_halls_membership() {
        let d = DomainSpec::RoomsAndHalls { j_max: 4 };
        // Inside room R_0 (spans [0, 1/2] x [0,1], mirrored across x=0).
        assert!(d.contains(&p2(0.25, 0.9)).unwrap());
        assert!(d.contains(&p2(-0.25, 0.9)).unwrap());
        // The mirror seam x=0 is interior.
        assert!(d.contains(&p2(0.0, 0.5)).unwrap());
        // Inside hall H_1 ([1/2, 5/8] x [0, 1/2]).
        assert!(d.contains(&p2(0.56, 0.4)).unwrap());
        assert!(!d.contains(&p2(0.56, 0.6)).unwrap(), "above hall 1");
        // Shared edge between R_0 and H_1 at x = 1/2: interior only below the
        // hall height.
        assert!(d.contains(&p2(0.5, 0.3)).unwrap());
        assert!(!d.contains(&p2(0.5, 0.7)).unwrap());
        // Shared edge between H_1 and R_1 at x' = 5/8.
        assert!(d.contains(&p2(0.625, 0.49)).unwrap());
        assert!(!d.contains(&p2(0.625, 0.51)).unwrap());
        // Inside room R_1 ([5/8, 3/4] x [0,1]).
        assert!(d.contains(&p2(0.7, 0.95)).unwrap());
        // Beyond the truncated construction.
        assert!(!d.contains(&p2(0.99, 0.5)).unwrap());
        // Bottom edge is boundary.
        assert!(!d.contains(&p2(0.25, 0.0)).unwrap());
    }

    #[test]
    fn block_tower_membership() {
        let d = DomainSpec::BlockTower { n: 2, m_max: 7 };
        assert!(d.contains(&p2(0.5, 0.5)).unwrap());
        // Block 2: [1/3, 2/3] x [1, 4/3].
        assert!(d.contains(&p2(0.5, 1.2)).unwrap());
        assert!(!d.contains(&p2(0.2, 1.2)).unwrap());
        // Contact face between blocks 1 and 2 is interior strictly inside the
        // smaller footprint.
        assert!(d.contains(&p2(0.5, 1.0)).unwrap());
        assert!(!d.contains(&p2(0.3, 1.0)).unwrap());
        // Block 4 (edge 1/9) sits at height 5/3 over the middle.
        let y4 = 1.0 + 1.0 / 3.0 + 1.0 / 3.0;
        assert!(d.contains(&p2(0.5, y4 + 0.05)).unwrap());
        assert!(d.contains(&p2(0.5, y4)).unwrap(), "contact face 3-4");
        assert!(!d.contains(&p2(0.4, y4 + 0.05)).unwrap());
        assert!((block_top(7) - (1.0 + 2.0 / 3.0 + 4.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn block_edges_follow_generations() {
        assert_eq!(block_edge(1), 1.0);
        assert_eq!(block_edge(2), 1.0 / 3.0);
        assert_eq!(block_edge(3), 1.0 / 3.0);
        assert_eq!(block_edge(4), 1.0 / 9.0);
        assert_eq!(block_edge(7), 1.0 / 9.0);
        assert_eq!(block_edge(8), 1.0 / 27.0);
    }

    #[test]
    fn disk_and_rooms_membership() {
        let d = DomainSpec::DiskAndRooms { j_max: 4 };
        assert!(d.contains(&p2(0.0, 0.0)).unwrap());
        assert!(d.contains(&p2(0.9, 0.1)).unwrap());
        // Room 1 hangs on the chord from z_1 = (1,0) to z_2 = (0,1) and
        // extends radially outward; its center is well outside the disk.
        let f = RectFrame::disk_room(1, 3.0);
        let mid = [
            f.base[0] + 0.5 * f.len * f.u[0] + 0.5 * f.height * f.v[0],
            f.base[1] + 0.5 * f.len * f.u[1] + 0.5 * f.height * f.v[1],
        ];
        assert!(d.contains(&p2(mid[0], mid[1])).unwrap());
        for c in f.corners().iter().skip(2) {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            assert!((r - 3.0).abs() < 1e-12, "outer corners on radius 3");
        }
        assert!(!d.contains(&p2(2.9, 2.9)).unwrap());
    }

    #[test]
    fn union_of_translated_squares() {
        let square = DomainSpec::UnitCube { n: 2 };
        let d = DomainSpec::UnionOf {
            parts: vec![
                UnionPart { spec: square.clone(), shift: p2(0.0, 0.0) },
                UnionPart { spec: square, shift: p2(0.5, 0.0) },
            ],
        };
        assert!(d.contains(&p2(1.2, 0.5)).unwrap());
        assert!(d.contains(&p2(0.7, 0.5)).unwrap());
        assert!(!d.contains(&p2(1.6, 0.5)).unwrap());
        let bb = d.bounding_box();
        assert_eq!(bb.hi[0], 1.5);
    }

    #[test]
    fn box_union_interior_covers_shared_faces() {
        let boxes = vec![
            AlignedBox::new2(0.0, 0.0, 1.0, 1.0),
            AlignedBox::new2(1.0, 0.25, 2.0, 0.75),
        ];
        assert!(box_union_interior(&boxes, &p2(1.0, 0.5), 2));
        assert!(!box_union_interior(&boxes, &p2(1.0, 0.1), 2));
        assert!(!box_union_interior(&boxes, &p2(1.0, 0.25), 2), "face corner");
        assert!(!box_union_interior(&boxes, &p2(2.0, 0.5), 2));
    }

    #[test]
    fn truncation_policy_rooms() {
        let d = DomainSpec::RoomsAndHalls { j_max: 10 };
        let (eff, note) = d.truncated(1.0 / 64.0);
        // Width rule: 2^{-(j+2)} >= 1/32 keeps j <= 3; hall heights 1/(j+1)!
        // also keep j <= 3 at this h.
        assert_eq!(eff, DomainSpec::RoomsAndHalls { j_max: 3 });
        assert!(note.dropped_measure > 0.0);
        let (eff256, _) = d.truncated(1.0 / 256.0);
        // Hall height rule binds first: 1/5! = 1/120 >= 1/128 keeps j = 4,
        // 1/6! drops j = 5.
        assert_eq!(eff256, DomainSpec::RoomsAndHalls { j_max: 4 });
    }

    #[test]
    fn truncation_policy_tower_and_cusp() {
        let d = DomainSpec::BlockTower { n: 2, m_max: 31 };
        let (eff, _) = d.truncated(1.0 / 256.0);
        // Edge 3^{-j} >= 1/128 keeps generations j <= 4 (m <= 31): 3^-4 = 1/81.
        assert_eq!(eff, DomainSpec::BlockTower { n: 2, m_max: 31 });
        let (eff64, note) = d.truncated(1.0 / 64.0);
        // At h = 1/64, 2h = 1/32: generation 4 (edge 1/81) is dropped.
        assert_eq!(eff64, DomainSpec::BlockTower { n: 2, m_max: 15 });
        assert!(note.dropped_measure > 0.0);

        let c = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        let (eff_c, note_c) = c.truncated(1.0 / 256.0);
        assert_eq!(eff_c, c);
        let x_min = (1.0f64 / 256.0).powf(1.0 / 3.0);
        let expect = 2.0 * x_min.powi(4) / 4.0;
        assert!((note_c.dropped_measure - expect).abs() < 1e-15);
    }

    #[test]
    fn sweep_stages_nest() {
        let c = DomainSpec::Cusp { alpha: 3.0, n: 2 };
        let r1 = c.sweep_stage(1);
        let r4 = c.sweep_stage(4);
        let probe = p2(0.3, 0.0);
        // Deeper stages keep more of the tip.
        assert!(!r1.contains(&probe));
        assert!(r4.contains(&probe));

        let t = DomainSpec::BlockTower { n: 2, m_max: 31 };
        match (t.sweep_stage(1), t.sweep_stage(2)) {
            (
                StageRegion::LastAxisAtMost { y_max: y1, .. },
                StageRegion::LastAxisAtMost { y_max: y2, .. },
            ) => {
                assert!((y1 - 1.0).abs() < 1e-15, "generation 0 only");
                assert!((y2 - (1.0 + 2.0 / 3.0)).abs() < 1e-15);
            }
            _ => panic!("unexpected stage regions"),
        }
    }

    #[test]
    fn serde_round_trip() {
        let d = DomainSpec::Cusp { alpha: 2.5, n: 2 };
        let s = serde_json::to_string(&d).unwrap();
        let back: DomainSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
    }
}
