//! Subcommand implementations. Every command loads the shared experiment
//! configuration, writes its artifacts plus a manifest into the output
//! directory, and maps its result onto the process exit code:
//! 0 success, 2 inconclusive classification, 3 certificate refusal, 1 error.

use crate::config::{
    ExperimentConfig, StencilChoice, TubeFamilyChoice, TubesSection, WhitneyFamilyChoice,
    WhitneySection,
};
use crate::manifest::{config_hash, load_manifests, ManifestBuilder};
use qhavg::geom::{DomainSpec, StageRegion};
use qhavg::integrals::{
    ls_integral, poincare_ratio, refinement_sweep, threshold_scan, Classification, IntegralReport,
};
use qhavg::io;
use qhavg::qh::{solve, QhField, Stencil};
use qhavg::raster::{rasterize, RasterDomain};
use qhavg::tubes::{
    block_tubes, certificate_text, certify_not_averaging, cusp_tubes, disk_rooms_tubes,
    rooms_halls_tubes, TubeFamily,
};
use qhavg::weights::{ar_estimate, union_check_rows};
use qhavg::whitney::{
    cube_bound_series, cube_subdivision, cusp_family, cusp_m_sum, cusp_upper_series,
    validate_subdivision, SubdivisionSet,
};
use serde_json::json;
use std::path::Path;

/// Process-level outcome of one subcommand run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Inconclusive,
    Refused,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Inconclusive => 2,
            Outcome::Refused => 3,
        }
    }
}

pub type CmdResult = Result<Outcome, String>;

fn err<T>(e: impl std::fmt::Display) -> Result<T, String> {
    Err(e.to_string())
}

/// Short stable identifier for CSV rows.
pub fn spec_id(spec: &DomainSpec) -> String {
    match spec {
        DomainSpec::UnitCube { n } => format!("unit_cube_n{n}"),
        DomainSpec::UnitBall { n } => format!("unit_ball_n{n}"),
        DomainSpec::Cusp { alpha, n } => format!("cusp_a{alpha}_n{n}"),
        DomainSpec::RoomsAndHalls { j_max } => format!("rooms_and_halls_j{j_max}"),
        DomainSpec::DiskAndRooms { j_max } => format!("disk_and_rooms_j{j_max}"),
        DomainSpec::BlockTower { n, m_max } => format!("block_tower_n{n}_m{m_max}"),
        DomainSpec::BoxUnion { n, boxes } => format!("box_union_n{n}_k{}", boxes.len()),
        DomainSpec::UnionOf { parts } => format!("union_of_k{}", parts.len()),
    }
}

fn stencil_of(choice: StencilChoice) -> Stencil {
    match choice {
        StencilChoice::Full => Stencil::Full,
        StencilChoice::Axis => Stencil::Axis,
    }
}

/// Short dyadic-friendly tag for a pitch, for artifact names: 1/256 -> "h256".
fn h_tag(h: f64) -> String {
    let inv = 1.0 / h;
    if (inv - inv.round()).abs() < 1e-9 && inv > 0.0 {
        format!("h{}", inv.round() as u64)
    } else {
        format!("h{h}")
    }
}

fn solve_at(cfg: &ExperimentConfig, h: f64) -> Result<(RasterDomain, QhField), String> {
    let raster = rasterize(&cfg.spec, h).map_err(|e| e.to_string())?;
    let field =
        solve(&raster, &cfg.run.z0, stencil_of(cfg.run.stencil)).map_err(|e| e.to_string())?;
    Ok((raster, field))
}

fn csv_artifact(
    builder: &mut ManifestBuilder,
    name: &str,
    write: impl FnOnce(&mut Vec<u8>) -> qhavg::Result<()>,
) -> Result<(), String> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| e.to_string())?;
    builder.write_artifact(name, &buf).map_err(|e| e.to_string())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// rasterize
// ---------------------------------------------------------------------------

pub fn cmd_rasterize(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let mut builder = ManifestBuilder::new(out, "rasterize", cfg).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for &h in &cfg.run.h_list {
        let raster = rasterize(&cfg.spec, h).map_err(|e| e.to_string())?;
        let tag = h_tag(h);
        let mut bin = Vec::new();
        io::write_raster(&mut bin, &raster).map_err(|e| e.to_string())?;
        builder.write_artifact(&format!("raster_{tag}.bin"), &bin).map_err(|e| e.to_string())?;
        csv_artifact(&mut builder, &format!("raster_{tag}.csv"), |w| io::raster_csv(w, &raster))?;
        rows.push(json!({
            "h": h,
            "dims": raster.grid.dims[..raster.grid.n].to_vec(),
            "inside_cells": raster.inside_count(),
            "volume_estimate": raster.volume_estimate(),
            "truncation": raster.truncation,
        }));
    }
    let summary = json!({ "spec": spec_id(&cfg.spec), "rasters": rows });
    builder.finish(Outcome::Success.code(), summary).map_err(|e| e.to_string())?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let mut builder = ManifestBuilder::new(out, "solve", cfg).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for &h in &cfg.run.h_list {
        let (_raster, field) = solve_at(cfg, h)?;
        let tag = h_tag(h);
        let mut bin = Vec::new();
        io::write_field(&mut bin, &field).map_err(|e| e.to_string())?;
        builder.write_artifact(&format!("field_{tag}.bin"), &bin).map_err(|e| e.to_string())?;
        csv_artifact(&mut builder, &format!("field_{tag}.csv"), |w| io::field_csv(w, &field))?;
        let k_max = field
            .k
            .iter()
            .zip(&field.inside)
            .filter(|(k, &ins)| ins && k.is_finite())
            .map(|(k, _)| *k)
            .fold(0.0f64, f64::max);
        rows.push(json!({
            "h": h,
            "base_center": field.base_center.coords(),
            "n_unreachable": field.n_unreachable,
            "k_max_finite": k_max,
        }));
    }
    let summary = json!({ "spec": spec_id(&cfg.spec), "fields": rows });
    builder.finish(Outcome::Success.code(), summary).map_err(|e| e.to_string())?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

pub fn cmd_integrate(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let mut builder = ManifestBuilder::new(out, "integrate", cfg).map_err(|e| e.to_string())?;
    let id = spec_id(&cfg.spec);
    let mut csv = String::from("spec,s,h,raw,normalized,mass,cells,excluded_unreachable\n");
    let mut rows = Vec::new();
    for &h in &cfg.run.h_list {
        let (_raster, field) = solve_at(cfg, h)?;
        for &s in &cfg.run.s_grid {
            let li = ls_integral(&field, s, cfg.weight.as_ref()).map_err(|e| e.to_string())?;
            csv.push_str(&format!(
                "{id},{s},{h},{},{},{},{},{}\n",
                li.raw, li.normalized, li.mass, li.cells, li.excluded_unreachable
            ));
            rows.push(json!({
                "s": s, "h": h, "raw": li.raw, "normalized": li.normalized,
                "mass": li.mass, "cells": li.cells,
                "excluded_unreachable": li.excluded_unreachable,
            }));
        }
    }
    builder.write_artifact("integrate.csv", csv.as_bytes()).map_err(|e| e.to_string())?;
    let summary = json!({
        "spec": id,
        "weight": cfg.weight,
        "integrals": rows,
    });
    builder.finish(Outcome::Success.code(), summary).map_err(|e| e.to_string())?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------------------
// sweep / scan
// ---------------------------------------------------------------------------

/// One CSV with the rows of several sweep reports: header once, then blocks.
fn combined_sweep_csv(id: &str, reports: &[IntegralReport]) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        let mut one = Vec::new();
        io::sweep_csv(&mut one, id, rep).map_err(|e| e.to_string())?;
        if i == 0 {
            buf.extend_from_slice(&one);
        } else {
            let body = one.splitn(2, |&b| b == b'\n').nth(1).unwrap_or(&[]).to_vec();
            buf.extend_from_slice(&body);
        }
    }
    Ok(buf)
}

fn sweep_summary_row(rep: &IntegralReport) -> serde_json::Value {
    json!({
        "s": rep.s,
        "classification": rep.classification,
        "slope": rep.slope,
        "final_raw": rep.rows.last().map(|r| r.raw),
        "notes": rep.notes,
    })
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let mut builder = ManifestBuilder::new(out, "sweep", cfg).map_err(|e| e.to_string())?;
    let id = spec_id(&cfg.spec);
    let mut reports = Vec::new();
    for &s in &cfg.run.s_grid {
        let rep =
            refinement_sweep(&cfg.spec, &cfg.run.z0, s, &cfg.run.h_list, &cfg.run.truncation_list)
                .map_err(|e| e.to_string())?;
        reports.push(rep);
    }
    let csv = combined_sweep_csv(&id, &reports)?;
    builder.write_artifact("sweep.csv", &csv).map_err(|e| e.to_string())?;
    let outcome = if reports.iter().any(|r| r.classification == Classification::Inconclusive) {
        Outcome::Inconclusive
    } else {
        Outcome::Success
    };
    let summary = json!({
        "spec": id,
        "rule": reports.first().map(|r| r.rule.clone()),
        "sweeps": reports.iter().map(sweep_summary_row).collect::<Vec<_>>(),
    });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

pub fn cmd_scan(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let mut builder = ManifestBuilder::new(out, "scan", cfg).map_err(|e| e.to_string())?;
    let id = spec_id(&cfg.spec);
    if cfg.run.s_grid.len() < 2 {
        return err("scan needs at least two s_grid entries");
    }
    let scan = threshold_scan(
        &cfg.spec,
        &cfg.run.z0,
        &cfg.run.s_grid,
        &cfg.run.h_list,
        &cfg.run.truncation_list,
    )
    .map_err(|e| e.to_string())?;
    let csv = combined_sweep_csv(&id, &scan.reports)?;
    builder.write_artifact("scan.csv", &csv).map_err(|e| e.to_string())?;
    let mut scan_json = serde_json::to_vec_pretty(&scan).map_err(|e| e.to_string())?;
    scan_json.push(b'\n');
    builder.write_artifact("scan.json", &scan_json).map_err(|e| e.to_string())?;
    let outcome = if scan.bracket.is_some() { Outcome::Success } else { Outcome::Inconclusive };
    let summary = json!({
        "spec": id,
        "bracket": scan.bracket.map(|(lo, hi)| vec![lo, hi]),
        "estimate": scan.estimate,
        "resolution": scan.resolution,
        "classifications": scan
            .s_grid
            .iter()
            .zip(&scan.classifications)
            .map(|(s, c)| json!({ "s": s, "classification": c }))
            .collect::<Vec<_>>(),
        "notes": scan.notes,
    });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// poincare
// ---------------------------------------------------------------------------

pub fn cmd_poincare(cfg: &ExperimentConfig, out: &Path, tol: f64) -> CmdResult {
    let section = cfg.poincare.as_ref().ok_or("config has no [poincare] section")?;
    let mut builder = ManifestBuilder::new(out, "poincare", cfg).map_err(|e| e.to_string())?;
    let h = section.h.unwrap_or_else(|| cfg.finest_h());
    let mut csv = String::from("j,p,h,j_eff,ratio,lower_bound,ok\n");
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &j in &section.j_list {
        let r = poincare_ratio(j, section.p, h).map_err(|e| e.to_string())?;
        let ok = r.ratio >= r.lower_bound * (1.0 - tol);
        all_ok &= ok;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.j, r.p, r.h, r.j_eff, r.ratio, r.lower_bound, ok
        ));
        rows.push(json!({
            "j": r.j, "p": r.p, "h": r.h, "j_eff": r.j_eff,
            "ratio": r.ratio, "lower_bound": r.lower_bound, "ok": ok,
        }));
    }
    builder.write_artifact("poincare.csv", csv.as_bytes()).map_err(|e| e.to_string())?;
    let outcome = if all_ok { Outcome::Success } else { Outcome::Refused };
    if !all_ok {
        builder.notes.push(format!(
            "some oscillation ratios fall below the guaranteed lower bound times (1 - {tol})"
        ));
    }
    let summary = json!({ "p": section.p, "h": h, "tol": tol, "ratios": rows });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// tubes
// ---------------------------------------------------------------------------

fn build_tube_family(cfg: &ExperimentConfig, t: &TubesSection) -> Result<TubeFamily, String> {
    match t.family {
        TubeFamilyChoice::Rooms => Ok(rooms_halls_tubes(t.count)),
        TubeFamilyChoice::DiskRooms => Ok(disk_rooms_tubes(t.count)),
        TubeFamilyChoice::Cusp => {
            let (alpha, n) = match (&cfg.spec, t.alpha, t.n) {
                (_, Some(a), Some(n)) => (a, n),
                (DomainSpec::Cusp { alpha, n }, a, nn) => (a.unwrap_or(*alpha), nn.unwrap_or(*n)),
                _ => return err("[tubes] cusp family needs alpha and n (or a cusp [spec])"),
            };
            Ok(cusp_tubes(alpha, n, t.count))
        }
        TubeFamilyChoice::Block => {
            let n = match (&cfg.spec, t.n) {
                (_, Some(n)) => n,
                (DomainSpec::BlockTower { n, .. }, None) => *n,
                _ => return err("[tubes] block family needs n (or a block_tower [spec])"),
            };
            Ok(block_tubes(n, t.count))
        }
    }
}

pub fn cmd_tubes(cfg: &ExperimentConfig, out: &Path, tol: f64) -> CmdResult {
    let section = cfg.tubes.as_ref().ok_or("config has no [tubes] section")?;
    let mut builder = ManifestBuilder::new(out, "tubes", cfg).map_err(|e| e.to_string())?;
    let family = build_tube_family(cfg, section)?;
    let s_list = section.s_list.clone().unwrap_or_else(|| cfg.run.s_grid.clone());
    let mut rows = Vec::new();
    let mut certified = Vec::new();
    let mut any_refused = false;
    for &s in &s_list {
        match certify_not_averaging(
            &cfg.spec,
            &family,
            s,
            section.n_slices,
            section.samples_per_slice,
            tol,
        ) {
            Ok(cert) => {
                let name = format!("tubes_s{s}.txt");
                builder
                    .write_artifact(&name, certificate_text(&cert).as_bytes())
                    .map_err(|e| e.to_string())?;
                rows.push(json!({
                    "s": s,
                    "certified": true,
                    "series_verdict": cert.series.verdict,
                    "tail_ratio_min": cert.series.tail_ratio_min,
                    "conclusion": cert.conclusion,
                }));
                certified.push(cert);
            }
            Err(qhavg::Error::CertificateRefused(reason)) => {
                any_refused = true;
                rows.push(json!({ "s": s, "certified": false, "reason": reason }));
            }
            Err(e) => return err(e),
        }
    }
    if !certified.is_empty() {
        let mut bytes = serde_json::to_vec_pretty(&certified).map_err(|e| e.to_string())?;
        bytes.push(b'\n');
        builder.write_artifact("tubes.json", &bytes).map_err(|e| e.to_string())?;
    }
    let outcome = if any_refused { Outcome::Refused } else { Outcome::Success };
    let summary = json!({
        "spec": spec_id(&cfg.spec),
        "family": family.name,
        "tubes": family.tubes.len(),
        "tol": tol,
        "certificates": rows,
    });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// whitney
// ---------------------------------------------------------------------------

struct WhitneyBuild {
    sets: Vec<SubdivisionSet>,
    ambient: DomainSpec,
    exclude: Option<StageRegion>,
    series: Vec<serde_json::Value>,
}

fn build_whitney(cfg: &ExperimentConfig, w: &WhitneySection) -> Result<WhitneyBuild, String> {
    match w.family {
        WhitneyFamilyChoice::Cube => {
            let n = match (&cfg.spec, w.n) {
                (_, Some(n)) => n,
                (DomainSpec::UnitCube { n }, None) => *n,
                _ => return err("[whitney] cube family needs n (or a unit_cube [spec])"),
            };
            let sub = cube_subdivision(n, w.layers).map_err(|e| e.to_string())?;
            let series = cfg
                .run
                .s_grid
                .iter()
                .map(|&s| {
                    cube_bound_series(n, s, w.layers)
                        .map(|rep| json!({ "s": s, "verdict": rep.verdict, "sum": rep.sum() }))
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(WhitneyBuild {
                sets: sub.sets,
                ambient: DomainSpec::UnitCube { n },
                exclude: None,
                series,
            })
        }
        WhitneyFamilyChoice::Cusp => {
            let (alpha, n) = match (&cfg.spec, w.alpha, w.n) {
                (_, Some(a), Some(n)) => (a, n),
                (DomainSpec::Cusp { alpha, n }, a, nn) => (a.unwrap_or(*alpha), nn.unwrap_or(*n)),
                _ => return err("[whitney] cusp family needs alpha and n (or a cusp [spec])"),
            };
            let sets = cusp_family(alpha, n, w.layers, w.m_max).map_err(|e| e.to_string())?;
            let series = cfg
                .run
                .s_grid
                .iter()
                .map(|&s| {
                    cusp_upper_series(alpha, n, s, w.layers, w.m_max)
                        .map(|rep| {
                            json!({
                                "s": s,
                                "verdict": rep.series.verdict,
                                "series_exponent": rep.series_exponent,
                                "m_sum": cusp_m_sum(s, w.m_max),
                            })
                        })
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(WhitneyBuild {
                sets,
                ambient: DomainSpec::Cusp { alpha, n },
                exclude: Some(StageRegion::XAtLeast { x_min: w.exclude_x_min }),
                series,
            })
        }
    }
}

pub fn cmd_whitney(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let section = cfg.whitney.as_ref().ok_or("config has no [whitney] section")?;
    let mut builder = ManifestBuilder::new(out, "whitney", cfg).map_err(|e| e.to_string())?;
    let build = build_whitney(cfg, section)?;
    csv_artifact(&mut builder, "whitney.csv", |w| io::subdivision_csv(w, &build.sets))?;
    let h = section.validate_h.unwrap_or_else(|| cfg.finest_h());
    let raster = rasterize(&build.ambient, h).map_err(|e| e.to_string())?;
    let report = validate_subdivision(&build.sets, &raster, build.exclude.as_ref(), cfg.run.seed);
    let clean =
        report.overlap_pairs.is_empty() && report.star_violations.is_empty() && report.connected;
    let outcome = if clean { Outcome::Success } else { Outcome::Refused };
    if !clean {
        builder.notes.push("subdivision axioms failed on the validation raster".into());
    }
    let summary = json!({
        "family": section.family,
        "sets": build.sets.len(),
        "validate_h": h,
        "validation": report,
        "series": build.series,
    });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// union
// ---------------------------------------------------------------------------

pub fn cmd_union(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let section = cfg.union.as_ref().ok_or("config has no [union] section")?;
    let mut builder = ManifestBuilder::new(out, "union", cfg).map_err(|e| e.to_string())?;
    let h = section.h.unwrap_or_else(|| cfg.finest_h());
    let s = section.s.unwrap_or(cfg.run.s_grid[0]);
    let (report, rows) =
        union_check_rows(&cfg.spec, &section.spec2, &cfg.run.z0, h, s, cfg.weight.as_ref())
            .map_err(|e| e.to_string())?;
    let n = cfg.spec.dim();
    csv_artifact(&mut builder, "union.csv", |w| io::union_csv(w, n, &report, &rows))?;
    let ar = match (&cfg.weight, section.r) {
        (Some(weight), Some(r)) => {
            let raster = rasterize(&cfg.spec, h).map_err(|e| e.to_string())?;
            let est = ar_estimate(
                weight,
                &raster,
                r,
                section.n_balls,
                &section.radius_grid,
                cfg.run.seed,
            )
            .map_err(|e| e.to_string())?;
            Some(est)
        }
        _ => None,
    };
    let outcome = if report.ok { Outcome::Success } else { Outcome::Inconclusive };
    if !report.ok {
        builder.notes.push("union inequalities exceeded the discretization tolerance".into());
    }
    let summary = json!({
        "spec1": spec_id(&cfg.spec),
        "spec2": spec_id(&section.spec2),
        "report": report,
        "ar_estimate": ar,
    });
    builder.finish(outcome.code(), summary).map_err(|e| e.to_string())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn cmd_report(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let manifests = load_manifests(out).map_err(|e| e.to_string())?;
    if manifests.is_empty() {
        return err(format!("no manifests found in {}; run some subcommands first", out.display()));
    }
    let expected = config_hash(cfg);
    for m in &manifests {
        if m.config_hash != expected {
            return err(format!(
                "refusing to aggregate: manifest for `{}` has config hash {} but the current \
                 config hashes to {expected}",
                m.subcommand, m.config_hash
            ));
        }
    }
    let mut builder = ManifestBuilder::new(out, "report", cfg).map_err(|e| e.to_string())?;
    // Volatile fields (wall time) stay out of the aggregate so identical
    // configurations reproduce identical report artifacts byte-for-byte.
    let entries: Vec<_> = manifests
        .iter()
        .map(|m| {
            json!({
                "subcommand": m.subcommand,
                "exit_code": m.exit_code,
                "artifacts": m.artifacts,
                "summary": m.summary,
                "notes": m.notes,
            })
        })
        .collect();
    let aggregate = json!({
        "config_hash": expected,
        "spec": spec_id(&cfg.spec),
        "subcommands": entries,
    });
    let mut bytes = serde_json::to_vec_pretty(&aggregate).map_err(|e| e.to_string())?;
    bytes.push(b'\n');
    builder.write_artifact("report.json", &bytes).map_err(|e| e.to_string())?;
    let summary = json!({
        "aggregated": manifests.iter().map(|m| m.subcommand.clone()).collect::<Vec<_>>(),
    });
    builder.finish(Outcome::Success.code(), summary).map_err(|e| e.to_string())?;
    Ok(Outcome::Success)
}
