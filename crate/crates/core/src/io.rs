//! On-disk formats: flat binary mask/field files with a fixed little-endian
//! header, and CSV exports for rasters, fields, sweeps, and subdivisions.
//!
//! Both binary formats share the header layout
//! `magic[4] | version u32 | n u32 | h f64 | origin f64[3] | dims u64[3]`
//! followed by one record per grid cell in row-major cell order (the same
//! order as `Grid::idx`). Floats print through Rust's shortest-roundtrip
//! formatter, so CSV output is deterministic and parses back bit-exact.

use crate::error::{Error, Result};
use crate::geom::{Point, MAX_DIM};
use crate::integrals::IntegralReport;
use crate::qh::QhField;
use crate::raster::{Grid, RasterDomain};
use crate::weights::{UnionCellRow, UnionReport};
use crate::whitney::SubdivisionSet;
use std::io::{Read, Write};

pub const RASTER_MAGIC: &[u8; 4] = b"QHRD";
pub const FIELD_MAGIC: &[u8; 4] = b"QHKF";
pub const FORMAT_VERSION: u32 = 1;

fn write_header(w: &mut impl Write, magic: &[u8; 4], grid: &Grid) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.n as u32).to_le_bytes())?;
    w.write_all(&grid.h.to_le_bytes())?;
    for a in 0..MAX_DIM {
        w.write_all(&grid.origin[a].to_le_bytes())?;
    }
    for a in 0..MAX_DIM {
        w.write_all(&(grid.dims[a] as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<Grid> {
    let got: [u8; 4] = read_exact(r)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let n = u32::from_le_bytes(read_exact(r)?) as usize;
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::Format(format!("bad dimension {n}")));
    }
    let h = f64::from_le_bytes(read_exact(r)?);
    let mut origin = [0.0; MAX_DIM];
    for slot in &mut origin {
        *slot = f64::from_le_bytes(read_exact(r)?);
    }
    let mut dims = [0usize; MAX_DIM];
    for slot in &mut dims {
        *slot = u64::from_le_bytes(read_exact(r)?) as usize;
    }
    if !(h > 0.0) || dims[..n].iter().any(|&d| d == 0) || dims[n..].iter().any(|&d| d != 1) {
        return Err(Error::Format("inconsistent grid header".into()));
    }
    Ok(Grid { n, h, origin, dims })
}

/// Write the raster's inside mask as `QHRD` (one u8 per cell, 1 = inside).
pub fn write_raster(w: &mut impl Write, raster: &RasterDomain) -> Result<()> {
    write_header(w, RASTER_MAGIC, &raster.grid)?;
    let bytes: Vec<u8> = raster.inside.iter().map(|&b| b as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Read a `QHRD` mask back as (grid, inside).
pub fn read_raster(r: &mut impl Read) -> Result<(Grid, Vec<bool>)> {
    let grid = read_header(r, RASTER_MAGIC)?;
    let mut bytes = vec![0u8; grid.len()];
    r.read_exact(&mut bytes)?;
    Ok((grid, bytes.into_iter().map(|b| b != 0).collect()))
}

/// Write the solved field as `QHKF` (one f64 per cell; +inf on outside or
/// unreachable cells).
pub fn write_field(w: &mut impl Write, field: &QhField) -> Result<()> {
    write_header(w, FIELD_MAGIC, &field.grid)?;
    for idx in 0..field.grid.len() {
        let k = if field.inside[idx] { field.k[idx] } else { f64::INFINITY };
        w.write_all(&k.to_le_bytes())?;
    }
    Ok(())
}

/// Read a `QHKF` field back as (grid, k per cell).
pub fn read_field(r: &mut impl Read) -> Result<(Grid, Vec<f64>)> {
    let grid = read_header(r, FIELD_MAGIC)?;
    let mut k = vec![0.0f64; grid.len()];
    for slot in &mut k {
        *slot = f64::from_le_bytes(read_exact(r)?);
    }
    Ok((grid, k))
}

fn csv_point(p: &Point, n: usize) -> String {
    p.raw()[..n]
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn coord_header(n: usize) -> &'static str {
    if n == 2 {
        "x,y"
    } else {
        "x,y,z"
    }
}

/// CSV of inside-cell centers and their boundary distances.
pub fn raster_csv(w: &mut impl Write, raster: &RasterDomain) -> Result<()> {
    let n = raster.grid.n;
    writeln!(w, "{},dist", coord_header(n))?;
    for idx in 0..raster.grid.len() {
        if !raster.inside[idx] {
            continue;
        }
        let c = raster.grid.center(raster.grid.cell(idx));
        writeln!(w, "{},{}", csv_point(&c, n), raster.dist[idx])?;
    }
    Ok(())
}

/// CSV of inside-cell centers and field values (`inf` for unreachable).
pub fn field_csv(w: &mut impl Write, field: &QhField) -> Result<()> {
    let n = field.grid.n;
    writeln!(w, "{},k", coord_header(n))?;
    for idx in 0..field.grid.len() {
        if !field.inside[idx] {
            continue;
        }
        let c = field.grid.center(field.grid.cell(idx));
        writeln!(w, "{},{}", csv_point(&c, n), field.k[idx])?;
    }
    Ok(())
}

/// CSV of sweep rows: one line per (h, truncation) sample.
pub fn sweep_csv(w: &mut impl Write, spec_id: &str, report: &IntegralReport) -> Result<()> {
    writeln!(w, "spec,s,h,truncation,raw,normalized,classification,slope")?;
    let class = serde_plain_class(report);
    let slope = report.slope.map(|v| v.to_string()).unwrap_or_default();
    for row in &report.rows {
        writeln!(
            w,
            "{spec_id},{},{},{},{},{},{class},{slope}",
            report.s, row.h, row.truncation, row.raw, row.normalized
        )?;
    }
    Ok(())
}

fn serde_plain_class(report: &IntegralReport) -> &'static str {
    match report.classification {
        crate::integrals::Classification::Saturating => "saturating",
        crate::integrals::Classification::Growing => "growing",
        crate::integrals::Classification::Inconclusive => "inconclusive",
    }
}

/// Union-check report CSV: a `#`-prefixed summary block (member means `C1`
/// and `C2`, the chain bound `2^s (C1 + C2)`, the achieved union mean, and
/// the discretization tolerance) followed by one row per covered union cell
/// with the member distances and the pointwise slack `k1 + k2 - k_union`.
pub fn union_csv(
    w: &mut impl Write,
    n: usize,
    report: &UnionReport,
    rows: &[UnionCellRow],
) -> Result<()> {
    writeln!(w, "# s,{}", report.s)?;
    writeln!(w, "# h,{}", report.h)?;
    writeln!(w, "# C1,{}", report.member_means[0])?;
    writeln!(w, "# C2,{}", report.member_means[1])?;
    writeln!(w, "# bound,{}", report.bound)?;
    writeln!(w, "# achieved,{}", report.achieved)?;
    writeln!(w, "# tol,{}", report.tol)?;
    writeln!(w, "# ok,{}", report.ok)?;
    writeln!(w, "{},k_union,k1,k2,slack", coord_header(n))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_point(&r.center, n),
            r.k_union,
            r.k1,
            r.k2,
            r.slack
        )?;
    }
    Ok(())
}

/// CSV of subdivision sets: geometry scalars plus neighbor ids joined by `;`.
pub fn subdivision_csv(w: &mut impl Write, sets: &[SubdivisionSet]) -> Result<()> {
    writeln!(w, "id,family,layer,d,d_x,d_r,delta,measure_ub,neighbors")?;
    for s in sets {
        let family = match &s.family {
            crate::whitney::FamilyTag::Cube { .. } => "cube",
            crate::whitney::FamilyTag::CuspSet { .. } => "cusp",
            crate::whitney::FamilyTag::Block { .. } => "block",
        };
        let neighbors = s
            .neighbors
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.id,
            family,
            s.layer,
            s.d,
            opt(s.d_x),
            opt(s.d_r),
            s.delta,
            opt(s.measure_ub),
            neighbors
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DomainSpec;
    use crate::qh::{solve, Stencil};
    use crate::raster::rasterize;

    fn sample() -> (RasterDomain, QhField) {
        let raster = rasterize(&DomainSpec::UnitCube { n: 2 }, 1.0 / 16.0).unwrap();
        let field = solve(&raster, &Point::new2(0.5, 0.5), Stencil::Full).unwrap();
        (raster, field)
    }

    #[test]
    fn raster_and_field_round_trip_bit_exact() {
        let (raster, field) = sample();
        let mut buf = Vec::new();
        write_raster(&mut buf, &raster).unwrap();
        let (grid, inside) = read_raster(&mut buf.as_slice()).unwrap();
        assert!(grid.same_frame(&raster.grid));
        assert_eq!(inside, raster.inside);

        let mut buf = Vec::new();
        write_field(&mut buf, &field).unwrap();
        let (grid, k) = read_field(&mut buf.as_slice()).unwrap();
        assert!(grid.same_frame(&field.grid));
        for idx in 0..grid.len() {
            if field.inside[idx] {
                assert_eq!(k[idx].to_bits(), field.k[idx].to_bits());
            } else {
                assert!(k[idx].is_infinite());
            }
        }
    }

    #[test]
    fn magic_and_version_are_checked() {
        let (raster, field) = sample();
        let mut buf = Vec::new();
        write_raster(&mut buf, &raster).unwrap();
        // A field reader must reject a raster file.
        assert!(matches!(read_field(&mut buf.as_slice()), Err(Error::Format(_))));
        buf[4] = 99; // corrupt version
        assert!(matches!(read_raster(&mut buf.as_slice()), Err(Error::Format(_))));

        let mut buf = Vec::new();
        write_field(&mut buf, &field).unwrap();
        assert!(matches!(read_raster(&mut buf.as_slice()), Err(Error::Format(_))));
        // Truncated payload.
        buf.truncate(buf.len() - 3);
        assert!(read_field(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_outputs_are_deterministic_and_parse_back() {
        let (raster, field) = sample();
        let mut a = Vec::new();
        let mut b = Vec::new();
        raster_csv(&mut a, &raster).unwrap();
        raster_csv(&mut b, &raster).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y,dist");
        let first = lines.next().unwrap();
        let fields: Vec<f64> = first.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), 3);
        // Shortest-roundtrip formatting parses back to the same bits.
        let c = raster.grid.center(
            raster.grid.cell((0..raster.grid.len()).find(|&i| raster.inside[i]).unwrap()),
        );
        assert_eq!(fields[0].to_bits(), c.raw()[0].to_bits());

        let mut f = Vec::new();
        field_csv(&mut f, &field).unwrap();
        assert!(String::from_utf8(f).unwrap().starts_with("x,y,k\n"));
    }

    #[test]
    fn sweep_and_subdivision_csv_shapes() {
        let spec = DomainSpec::UnitCube { n: 2 };
        let rep = crate::integrals::refinement_sweep(
            &spec,
            &Point::new2(0.5, 0.5),
            2.0,
            &[1.0 / 16.0],
            &[1, 2, 3, 4],
        )
        .unwrap();
        let mut buf = Vec::new();
        sweep_csv(&mut buf, "unit-cube-2", &rep).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("spec,s,h,truncation,raw,normalized,classification,slope\n"));
        assert_eq!(text.lines().count(), 1 + rep.rows.len());
        assert!(text.contains("saturating"));

        let sets = crate::whitney::cube_subdivision(2, 2).unwrap().sets;
        let mut buf = Vec::new();
        subdivision_csv(&mut buf, &sets).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + sets.len());
        assert!(text.lines().nth(1).unwrap().starts_with("0,cube,0,"));
    }
}
