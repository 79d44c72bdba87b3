#!/usr/bin/env python3
"""Smoke test for the qhavg_py extension module.

Exercises each exported class and function once with small inputs and
checks a handful of known values. Build the extension first:

    cargo build -p qhavg-py
    cp target/debug/libqhavg_py.so <somewhere>/qhavg_py.so
    PYTHONPATH=<somewhere> python3 python/smoke_test.py
"""

import math
import sys
import tempfile

import qhavg_py as q

checks = 0


def check(cond, label):
    global checks
    checks += 1
    if not cond:
        print(f"FAIL: {label}")
        sys.exit(1)
    print(f"ok: {label}")


def main():
    print(f"qhavg_py {q.__version__}")

    # --- domains -----------------------------------------------------------
    cube = q.Domain.unit_cube(2)
    check(cube.dim() == 2, "unit cube is planar")
    check(cube.contains([0.5, 0.5]) and not cube.contains([1.5, 0.5]),
          "cube membership")
    lo, hi = cube.bounding_box()
    check(lo == [0.0, 0.0] and hi == [1.0, 1.0], "cube bounding box")

    cusp = q.Domain.cusp(3.0, 2)
    check(cusp.contains([0.5, 0.1]) and not cusp.contains([0.5, 0.2]),
          "cusp membership |y| < x^3")

    rt = q.Domain.from_json(cube.to_json())
    check(rt.contains([0.25, 0.25]), "domain JSON round trip")

    ball = q.Domain.unit_ball(2)
    check(ball.contains([0.0, 0.0]) and not ball.contains([1.0, 0.0]),
          "ball membership")

    # --- raster + field ----------------------------------------------------
    h = 1.0 / 128
    raster = cube.rasterize(h)
    check(raster.h == h, "raster pitch")
    check(abs(raster.volume_estimate - 1.0) < 0.05, "cube volume estimate")
    check(raster.dist_at([0.5, 0.5]) > 0.45, "center boundary distance")
    trunc = raster.truncation()
    check(trunc["dropped_measure"] == 0.0, "cube drops nothing")

    field = raster.solve([0.5, 0.5])
    check(field.n_unreachable == 0, "cube field fully reachable")
    # k((0.5,0.1), (0.5,0.5)) should be close to ln 5 = ln(0.5/0.1)
    v = field.value_at([0.5, 0.1])
    check(abs(v - math.log(5.0)) < 0.05 * math.log(5.0),
          f"vertical ray value {v:.4f} ~ ln 5")
    path = field.geodesic([0.5, 0.1])
    check(len(path) > 5 and all(len(p) == 2 for p in path),
          "geodesic is a planar polyline")

    # base point outside the domain must be rejected
    try:
        raster.solve([1.5, 0.5])
        check(False, "outside base point rejected")
    except ValueError:
        check(True, "outside base point rejected")

    # --- integrals and sweeps ----------------------------------------------
    li = field.ls_integral(2.0)
    check(li["cells"] == raster.inside_count, "integral covers every cell")
    check(li["normalized"] > 0.0, "mean of k^2 positive")

    w = q.Weight.constant(3.0)
    lw = field.ls_integral(2.0, w)
    check(abs(lw["normalized"] - li["normalized"]) < 1e-12,
          "constant weight leaves the mean unchanged")

    rep = q.refinement_sweep(cusp, [0.75, 0.0], 1.0,
                             [1.0 / 32, 1.0 / 64], [1, 2, 3, 4])
    check(rep["classification"] == "saturating",
          "cusp s=1 sweep saturates")

    scan = q.threshold_scan(cusp, [0.75, 0.0], [1.0, 3.0],
                            [1.0 / 64, 1.0 / 128], [1, 2, 3, 4, 5])
    check(scan["bracket"] == [1.0, 3.0], "coarse scan brackets the threshold")

    pr = q.poincare_ratio(2, 2.0, 1.0 / 512)
    check(pr["ratio"] >= pr["lower_bound"] * 0.99,
          "oscillation ratio beats its lower bound")

    # --- tubes --------------------------------------------------------------
    rooms = q.Domain.rooms_and_halls(24)
    fam = q.TubeFamily.rooms(6)
    check(len(fam) == 6, "six hall tubes")
    ser = fam.series(1.0)
    check(ser["verdict"] == "diverges", "hall series diverges at s=1")

    cert = fam.certify(rooms, 1.0, n_slices=12, samples_per_slice=12)
    check("not" in cert["report"]["conclusion"],
          "rooms certificate concludes non-averaging")
    check(cert["text"].startswith("divergence certificate"),
          "certificate text renders")

    conv = q.TubeFamily.cusp(3.0, 2, 6).series(1.0)
    check(conv["verdict"] == "converges", "cusp tube series converges at s=1")

    # --- whitney ------------------------------------------------------------
    check(q.lambda_chain(51) == [51, 25, 12, 6, 3, 1], "index chain of 51")
    cu = q.cusp_upper_series(3.0, 2, 1.0, 20, 4096)
    check(cu["threshold_condition_holds"], "cusp upper series in range at s=1")
    bu = q.block_upper_series(2, 1.0, 2**10, 30)
    check(bu["series"]["verdict"] == "converges",
          "block upper series converges at s=1")
    cb = q.cube_chain_bound(2, [0.9, 0.9])
    check(cb["value"] > 0.0, "chain bound positive off-center")

    # --- union + weights -----------------------------------------------------
    shifted = q.Domain.box_union(2, [([0.5, 0.0], [1.5, 1.0])])
    un = q.union_check(cube, shifted, [0.75, 0.5], 1.0 / 64, 2.0)
    check(un["ok"], "union inequalities hold")
    check(un["achieved"] <= un["bound"], "integral chain below its bound")

    hc = q.holder_check(field, q.Weight.power([0.5, 0.5], 0.5), 1.0, 2.0)
    check(hc["ok"], "Hölder comparison holds")

    ar = q.ar_estimate(q.Weight.constant(1.0), raster, 2.0, 16,
                       [0.05, 0.1], 7)
    check(abs(ar["estimate"] - 1.0) < 1e-9,
          "constant weight has unit Muckenhoupt product")

    # --- file I/O -------------------------------------------------------------
    with tempfile.TemporaryDirectory() as td:
        raster.save(td + "/r.bin")
        raster.save_csv(td + "/r.csv")
        field.save(td + "/f.bin")
        field.save_csv(td + "/f.csv")
        with open(td + "/f.csv") as fh:
            header = fh.readline().strip()
        check(header.startswith("x,y"), "field CSV header")

    print(f"\nall {checks} smoke checks passed")


if __name__ == "__main__":
    main()
