"""The ten acceptance criteria, one test each, at their stated tolerances.

Each test records a pass/fail line; the lines are printed as they happen and
again in the terminal summary.
"""
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial import cKDTree

from curvatura.checks import oracle_direction_error
from curvatura.curvature import omega_double_torus_closed_form, omega_matrix
from curvatura.field4 import make_double_torus, sample_surface_points
from curvatura.stereo import check_transfer, mesh_double_torus
from curvatura.symmetry import GAMMA3
from curvatura.tracer import build_cw_complex, e2_seeds, explicit_separatrices, separatrix_residuals, trace_batch
from curvatura.umbilic import (
    ThetaSystem,
    closed_form_roots,
    find_umbilics,
    groebner_candidates,
    known_umbilics,
    monge_chart_jet,
    separatrix_slopes,
    umbilic_index,
)

from .conftest import ACCEPTANCE, R_DEFAULT

SQRT3 = np.sqrt(3)


@contextmanager
def criterion(k):
    """Record criterion k as passed unless the body raises; ``info`` collects the detail."""
    info = {"detail": ""}
    ok = False
    try:
        yield info
        ok = True
    finally:
        # Parametrized criteria accumulate: all cases must pass.
        prev_ok, prev_detail = ACCEPTANCE.get(k, (True, ""))
        ACCEPTANCE[k] = (prev_ok and ok, "; ".join(d for d in (prev_detail, info["detail"]) if d))
        print(f"\ncriterion {k:2d}: {'PASS' if ok else 'FAIL'}  {info['detail']}")


def test_criterion_01_umbilic_locations():
    with criterion(1) as info:
        s = make_double_torus(R_DEFAULT)
        t0 = time.perf_counter()
        reps = find_umbilics(s)
        elapsed = time.perf_counter() - t0
        pts = np.array(sorted(tuple(r.position) for r in reps))
        c = 1 / np.sqrt(20)
        expected = np.array(sorted((sx * c, sy * c, 0.0, 0.0) for sx in (1, -1) for sy in (1, -1)))
        err = float(np.max(np.abs(pts - expected))) if pts.shape == expected.shape else np.inf
        info["detail"] = f"{len(reps)} umbilics, max deviation {err:.1e}, {elapsed:.2f} s"
        assert len(reps) == 4
        assert err <= 1e-10
        assert elapsed <= 10


def _g1_normalized_residual(coeffs, z):
    """|G1(z)| evaluated exactly at the float z, relative to the largest coefficient."""
    zf = Fraction(z)
    val = Fraction(0)
    for c in coeffs:
        val = val * zf + c
    return float(abs(val) / max(abs(c) for c in coeffs))


def test_criterion_02_groebner_roots():
    with criterion(2) as info:
        ts = ThetaSystem()
        t0 = time.perf_counter()
        cands = groebner_candidates(ts)
        elapsed = time.perf_counter() - t0
        cf = closed_form_roots()
        pos = sorted(c.z for c in cands if c.z > 0)
        z1 = min(pos, key=lambda z: abs(z - 0.05))
        z2 = min(pos, key=lambda z: abs(z - cf["z2"]))
        res1 = _g1_normalized_residual(ts.g1_coeffs, z1)
        c1 = next(c for c in cands if c.z == z1)
        r2 = R_DEFAULT**2
        info["detail"] = (
            f"z1={z1:.17g} (G1 residual {res1:.1e}), |z2 - closed form|={abs(z2 - cf['z2']):.1e}, "
            f"w1={c1.w:.17g}, w1+z1={c1.w + c1.z:.3g} > r^2={r2:.3g}, {elapsed:.2f} s"
        )
        assert _g1_normalized_residual(ts.g1_coeffs, Fraction(1, 20)) == 0
        assert abs(z1 - 0.05) <= 1e-12 and res1 <= 1e-12
        assert abs(z2 - cf["z2"]) <= 1e-12
        assert abs(c1.w - 0.15) <= 1e-12
        assert c1.w + c1.z > r2 and not c1.feasible
        assert elapsed <= 1


def test_criterion_03_separatrix_slopes():
    with criterion(3) as info:
        s = make_double_torus(R_DEFAULT)
        errs = []
        for P in known_umbilics(s.r):
            slopes = np.sort(separatrix_slopes(monge_chart_jet(s, P)))
            errs.append(float(np.max(np.abs(slopes - [-SQRT3, 0.0, SQRT3]))) if len(slopes) == 3 else np.inf)
        info["detail"] = f"max slope deviation {max(errs):.1e} over 4 umbilics"
        assert max(errs) <= 1e-9


def test_criterion_04_umbilic_index():
    with criterion(4) as info:
        s = make_double_torus(R_DEFAULT)
        indices = [umbilic_index(s, P) for P in known_umbilics(s.r)]
        chi = build_cw_complex(s).euler_characteristic
        info["detail"] = f"indices {[str(i) for i in indices]}, sum {sum(indices)}, CW chi {chi}"
        assert all(i == Fraction(-1, 2) for i in indices)
        assert sum(indices) == chi == -2


def test_criterion_05_explicit_separatrices():
    with criterion(5) as info:
        r = R_DEFAULT
        s = make_double_torus(r)
        seps = explicit_separatrices(r)
        surf = quad = 0.0
        for sep in seps:
            a, b = separatrix_residuals(s, sep, 1000)
            surf, quad = max(surf, a), max(quad, b)
        t = np.linspace(*seps[0].domain, 1000)
        sym = max(float(np.max(np.abs(b2(t) - b1(t) @ GAMMA3.T))) for b1, b2 in zip(seps[0].branches, seps[1].branches))
        info["detail"] = f"surface {surf:.1e}, quadratic {quad:.1e}, |S2 - G3 S1| {sym:.1e}"
        assert surf <= 1e-12
        assert quad <= 1e-10
        assert sym <= 1e-12


def test_criterion_06_closed_cycles():
    with criterion(6) as info:
        s = make_double_torus(1.0)
        n = 20
        h = 1e-3 * s.r
        seeds = e2_seeds(s, n)
        folds = ["max"] * n + ["min"] * n
        t0 = time.perf_counter()
        full = trace_batch(s, np.concatenate([seeds, seeds]), folds, h=h)
        half = trace_batch(s, np.concatenate([seeds, seeds]), folds, h=h / 2)
        elapsed = time.perf_counter() - t0
        closed = sum(t.closed for t in full)
        closed_half = sum(t.closed for t in half)
        worst = max(t.closure_distance for t in full)
        # Step halving: same closed curve (Hausdorff distance) and same length.
        haus = max(
            max(cKDTree(a.vertices).query(b.vertices)[0].max(), cKDTree(b.vertices).query(a.vertices)[0].max())
            for a, b in zip(full, half)
        )
        dlen = max(abs(a.arc_length - b.arc_length) / a.arc_length for a, b in zip(full, half))
        info["detail"] = (
            f"closed {closed}/{2 * n} (h), {closed_half}/{2 * n} (h/2), worst closure {worst:.1e} <= {10 * h:.0e}, "
            f"h vs h/2: Hausdorff {haus / h:.2f} h, length {dlen:.1e}, {elapsed:.1f} s"
        )
        assert closed == closed_half == 2 * n
        assert worst <= 10 * h
        assert haus <= h and dlen <= 1e-5
        assert elapsed <= 60


def test_criterion_07_oracle_equivalence():
    with criterion(7) as info:
        s = make_double_torus(R_DEFAULT)
        X = sample_surface_points(s, 1000, np.random.default_rng(7), margin=1e-3 * s.r**2)
        errs = np.array([oracle_direction_error(s, x) for x in X])
        info["detail"] = f"max direction error {errs.max():.1e} rad on {len(X)} points"
        assert errs.max() <= 1e-6


def test_criterion_08_omega_closed_form():
    with criterion(8) as info:
        s = make_double_torus(R_DEFAULT)
        X = sample_surface_points(s, 1000, np.random.default_rng(8))
        A = omega_matrix(s, X)
        B = omega_double_torus_closed_form(s.r, X).m
        rel = np.linalg.norm(A - B, axis=(1, 2)) / np.linalg.norm(B, axis=(1, 2))
        info["detail"] = f"max relative difference {rel.max():.1e} on {len(X)} points"
        assert rel.max() <= 1e-9


def test_criterion_09_stereographic_transfer():
    with criterion(9) as info:
        s = make_double_torus(1.0)
        t0 = time.perf_counter()
        n_seed = 4
        seeds = e2_seeds(s, n_seed)
        traces = trace_batch(s, np.concatenate([seeds, seeds]), ["max"] * n_seed + ["min"] * n_seed)
        mesh = mesh_double_torus(s, 128)
        rep = check_transfer(s, mesh, traces, known_umbilics(s.r), samples_per_trace=40)
        elapsed = time.perf_counter() - t0
        gap = float(rep.umbilic_gaps.max())
        info["detail"] = (
            f"{len(rep.angles)} samples ({rep.excluded} near-umbilic excluded), max angle {rep.max_angle:.1e} rad, "
            f"umbilic gap {gap:.1e}, {elapsed:.1f} s"
        )
        assert rep.max_angle <= 1e-3
        assert gap <= 1e-4
        assert elapsed <= 120


@pytest.mark.parametrize("r", [R_DEFAULT, 1.0])
def test_criterion_10_mesh_topology(r):
    with criterion(10) as info:
        s = make_double_torus(r)
        rows = []
        for n in (16, 32, 64):
            mesh = mesh_double_torus(s, n)
            rows.append((n, mesh.is_closed(), mesh.is_orientable(), mesh.euler_characteristic))
        info["detail"] = "; ".join(f"r={r:.3g} n={n}: closed {c}, orientable {o}, chi {x}" for n, c, o, x in rows)
        assert all(c and o and x == -2 for _, c, o, x in rows)
