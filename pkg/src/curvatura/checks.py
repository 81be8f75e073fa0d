"""Named invariant battery shared by the ``verify`` command and the tests."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .curvature import (
    line_angle,
    omega_ambient,
    omega_double_torus_closed_form,
    omega_frame,
    shape_operator_fd_oracle,
)
from .field4 import LinkSurface, project_batch, sample_surface_points, surface_point
from .stereo import check_transfer, make_stereo_map, mesh_double_torus, stereo_inverse, stereo_project
from .symmetry import GAMMA3
from .tracer import build_cw_complex, e2_seeds, explicit_separatrices, s3_conjugated, s3_direct, separatrix_residuals, trace_batch
from .umbilic import (
    ThetaSystem,
    certify_umbilics,
    closed_form_roots,
    groebner_candidates,
    known_umbilics,
    monge_chart_jet,
    separatrix_slopes,
    umbilic_index,
)

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "value": float(self.value) if np.isfinite(self.value) else None,
            "tolerance": float(self.tolerance),
            "detail": self.detail,
        }


@dataclass
class CheckContext:
    s: LinkSurface
    theta: ThetaSystem = field(default_factory=ThetaSystem)
    quick: bool = False
    seed: int = 0
    h: float | None = None
    seeds: int = 20
    workers: int | None = None

    def size(self, n: int) -> int:
        return max(1, n // 10) if self.quick else n

    @property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    @property
    def double_torus(self) -> bool:
        return (self.s.p, self.s.q) == (2, 3)


def _result(name, value, tol, detail="", ok=None) -> CheckResult:
    ok = (value <= tol) if ok is None else ok
    return CheckResult(name, "pass" if ok else "fail", float(value), float(tol), detail)


def _skip(name, why) -> CheckResult:
    return CheckResult(name, "skipped", 0.0, 0.0, why)


def random_surface_points(ctx: CheckContext, n: int) -> np.ndarray:
    """Random points of the surface; for p != 2 by projecting random sphere points."""
    s = ctx.s
    if s.p == 2:
        return sample_surface_points(s, n, ctx.rng, margin=1e-3 * s.r**2)
    P = ctx.rng.normal(size=(4 * n, 4))
    P *= s.r / np.linalg.norm(P, axis=1, keepdims=True)
    X, _, ok = project_batch(s, P)
    return X[ok][:n]


def check_gradient(ctx: CheckContext) -> CheckResult:
    s = ctx.s
    X = random_surface_points(ctx, ctx.size(200))
    h = 1e-6 * max(1.0, s.r)
    err = 0.0
    for fld in (s.f, s.g):
        g = fld.gradient(X)
        fd = np.stack([(fld(X + h * e) - fld(X - h * e)) / (2 * h) for e in np.eye(4)], axis=-1)
        err = max(err, float(np.max(np.abs(g - fd) / (1 + np.abs(g)))))
    return _result("gradient", err, 1e-6, "symbolic vs central-difference gradients")


def check_projection(ctx: CheckContext) -> CheckResult:
    s = ctx.s
    X = random_surface_points(ctx, ctx.size(200))
    P = X + 1e-3 * s.r * ctx.rng.normal(size=X.shape)
    Y, _, ok = project_batch(s, P)
    res = float(np.max(np.abs(s.residuals(Y[ok])))) if np.any(ok) else np.inf
    return _result("projection", res, s.eps_surf, f"{int(ok.sum())}/{len(ok)} converged", ok=bool(ok.all()) and res <= s.eps_surf)


def check_omega(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("omega-cross-check", "closed form exists for (2, 3) only")
    s = ctx.s
    X = random_surface_points(ctx, ctx.size(1000))
    A = np.stack([omega_ambient(s, surface_point(s, x)).m for x in X])
    B = omega_double_torus_closed_form(s.r, X).m
    rel = float(np.max(np.linalg.norm(A - B, axis=(1, 2)) / np.linalg.norm(B, axis=(1, 2))))
    return _result("omega-cross-check", rel, 1e-9, "ambient determinant form vs closed form")


def oracle_direction_error(s: LinkSurface, X) -> float:
    """Angle between the Omega-root lines and the finite-difference principal lines at X."""
    p = surface_point(s, X)
    t1, t2 = p.tangent_basis
    roots = omega_frame(s, p, t1, t2).roots()
    M = shape_operator_fd_oracle(s, p, h=1e-4 * max(1.0, s.r), richardson=True)
    _, vecs = np.linalg.eigh(0.5 * (M + M.T))
    fd_dirs = vecs.T  # rows, in frame coordinates
    err = 0.0
    for rt in roots:
        err = max(err, float(np.min(line_angle(np.broadcast_to(rt, fd_dirs.shape), fd_dirs))))
    return err


def check_oracle(ctx: CheckContext) -> CheckResult:
    s = ctx.s
    X = random_surface_points(ctx, ctx.size(1000))
    errs = np.array([oracle_direction_error(s, x) for x in X])
    return _result("oracle-equivalence", float(errs.max()), 1e-6, "quadratic roots vs finite-difference eigen-directions")


def check_theta(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("theta-reduction", "stored elimination data is for (2, 3)")
    diff = ctx.theta.reduction_difference()
    exact = all(d == 0 for d in diff)
    rng = ctx.rng
    r = float(np.sqrt(float(ctx.theta.r2)))
    uv = rng.uniform(-r, r, size=(ctx.size(200), 2))
    res = ctx.theta.reduction_residual(uv[:, 0], uv[:, 1])
    detail = "exact identity holds" if exact else f"nonzero differences: {[str(d)[:40] for d in diff if d != 0]}"
    return _result("theta-reduction", res, 1e-12, detail, ok=exact and res <= 1e-12)


def check_groebner(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("groebner-exclusion", "stored elimination data is for (2, 3)")
    cands = groebner_candidates(ctx.theta)
    cf = closed_form_roots()
    zs = np.array([c.z for c in cands])
    dev = max(float(np.min(np.abs(zs - cf["z1"]))), float(np.min(np.abs(zs - cf["z2"]))))
    c1 = cands[int(np.argmin(np.abs(zs - cf["z1"])))]
    dev = max(dev, abs(c1.w - cf["w1"]))
    ok = dev <= 1e-12 and not any(c.feasible for c in cands)
    return _result("groebner-exclusion", dev, 1e-12, "; ".join(f"z={c.z:.6g}: {c.reason}" for c in cands), ok=ok)


def check_certificate(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("umbilic-certificate", "umbilic algebra is for (2, 3)")
    s = ctx.s
    step = s.r / (20 if ctx.quick else 200)
    cert = certify_umbilics(s, sweep_step=step, loci_samples=ctx.size(1000), workers=ctx.workers)
    detail = f"{cert.method}, {cert.sweep_points} sweep points, {len(cert.extra_umbilics)} extra umbilics"
    return _result("umbilic-certificate", len(cert.extra_umbilics), 0, detail, ok=cert.ok)


def check_umbilic_local(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("umbilic-local", "umbilic algebra is for (2, 3)")
    s = ctx.s
    err, indices = 0.0, []
    for P in known_umbilics(s.r):
        slopes = np.sort(separatrix_slopes(monge_chart_jet(s, P)))
        err = max(err, float(np.max(np.abs(slopes - [-SQRT3, 0.0, SQRT3]))) if len(slopes) == 3 else np.inf)
        indices.append(umbilic_index(s, P, samples=720 if not ctx.quick else 360))
    ok = err <= 1e-9 and all(i == -0.5 for i in indices)
    return _result("umbilic-local", err, 1e-9, f"indices {[str(i) for i in indices]}, sum {sum(indices)}", ok=ok)


def check_separatrices(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("separatrix-residuals", "explicit separatrices are for (2, 3)")
    s = ctx.s
    n = ctx.size(1000)
    seps = explicit_separatrices(s.r)
    surf = quad = 0.0
    for sep in seps:
        a, b = separatrix_residuals(s, sep, n)
        surf, quad = max(surf, a), max(quad, b)
    t = np.linspace(*seps[0].domain, n)
    sym = max(float(np.max(np.abs(b2(t) - b1(t) @ GAMMA3.T))) for b1, b2 in zip(seps[0].branches, seps[1].branches))
    conj = max(float(np.max(np.abs(s3_direct(s.r, i, t) - s3_conjugated(s.r, i, t)))) for i in range(4))
    tol_s = 1e-12 * max(1.0, s.r**3)
    ok = surf <= tol_s and quad <= 1e-10 and sym <= 1e-12 * max(1.0, s.r) and conj <= 1e-12 * max(1.0, s.r)
    detail = f"surface {surf:.2e}, quadratic {quad:.2e}, G3 image {sym:.2e}, conjugation {conj:.2e}"
    return _result("separatrix-residuals", max(surf, quad), 1e-10, detail, ok=ok)


def check_cw(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("cw-counts", "CW decomposition is for (2, 3)")
    cw = build_cw_complex(ctx.s)
    ok = cw.counts == (16, 30, 12) and cw.betti_z2() == (1, 4, 1)
    chi = cw.euler_characteristic
    return _result("cw-counts", chi, -2, f"cells {cw.counts}, chi {chi}, Z2 Betti {cw.betti_z2()}", ok=ok and chi == -2)


def check_closure(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("closure", "seeding along e2 is for (2, 3)")
    s = ctx.s
    n = ctx.size(ctx.seeds)
    h = ctx.h or 1e-3 * s.r
    seeds = e2_seeds(s, n)
    traces = trace_batch(s, np.concatenate([seeds, seeds]), ["max"] * n + ["min"] * n, h=h)
    closed = sum(t.closed for t in traces)
    worst = max(t.closure_distance for t in traces)
    return _result("closure", worst, 10 * h, f"closed: {closed}/{len(traces)}", ok=closed == len(traces) and worst <= 10 * h)


def check_stereo_roundtrip(ctx: CheckContext) -> CheckResult:
    s = ctx.s
    m = make_stereo_map(s)
    P = ctx.rng.normal(size=(ctx.size(1000) * 2, 4))
    P *= s.r / np.linalg.norm(P, axis=1, keepdims=True)
    P = P[np.linalg.norm(P - m.pole, axis=1) > 0.1 * s.r][: ctx.size(1000)]
    err = float(np.max(np.linalg.norm(stereo_inverse(m, stereo_project(m, P)) - P, axis=1)))
    return _result("stereo-roundtrip", err, 1e-12 * max(1.0, s.r), "inverse after projection on the sphere")


def check_mesh(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("mesh-topology", "hexagonal charts are for (2, 3)")
    s = ctx.s
    mesh = mesh_double_torus(s, 16)
    res = float(np.max(np.abs(s.residuals(mesh.vertices))))
    chi = mesh.euler_characteristic
    ok = mesh.is_closed() and mesh.is_orientable() and chi == -2
    ok = ok and res <= 1e-10 * max(1.0, s.r**3) and len(mesh.vertices) == mesh.counts["expected_vertices"]
    return _result("mesh-topology", chi, -2, f"n=16: {len(mesh.vertices)} vertices, chi {chi}, residual {res:.1e}", ok=ok)


def check_transfer_invariant(ctx: CheckContext) -> CheckResult:
    if not ctx.double_torus:
        return _skip("stereo-transfer", "meshing is for (2, 3)")
    s = ctx.s
    n_seed = 1 if ctx.quick else 4
    seeds = e2_seeds(s, n_seed)
    traces = trace_batch(s, np.concatenate([seeds, seeds]), ["max"] * n_seed + ["min"] * n_seed)
    mesh = mesh_double_torus(s, 128)
    rep = check_transfer(s, mesh, traces, known_umbilics(s.r), samples_per_trace=ctx.size(60) if not ctx.quick else 20)
    gap = float(rep.umbilic_gaps.max())
    ok = rep.max_angle <= 1e-3 and gap <= 1e-4
    detail = f"{len(rep.angles)} samples, max angle {rep.max_angle:.2e} rad, umbilic gap {gap:.2e}"
    return _result("stereo-transfer", rep.max_angle, 1e-3, detail, ok=ok)


CHECKS = {
    "gradient": check_gradient,
    "projection": check_projection,
    "omega-cross-check": check_omega,
    "oracle-equivalence": check_oracle,
    "theta-reduction": check_theta,
    "groebner-exclusion": check_groebner,
    "umbilic-certificate": check_certificate,
    "umbilic-local": check_umbilic_local,
    "separatrix-residuals": check_separatrices,
    "cw-counts": check_cw,
    "closure": check_closure,
    "stereo-roundtrip": check_stereo_roundtrip,
    "mesh-topology": check_mesh,
    "stereo-transfer": check_transfer_invariant,
}


def run_checks(ctx: CheckContext, names=None) -> list[CheckResult]:
    """Run the named checks (all by default) in registry order."""
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        try:
            res = CHECKS[name](ctx)
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(name, "fail", float("nan"), 0.0, f"{type(exc).__name__}: {exc}")
        out.append(CheckResult(res.name, res.status, res.value, res.tolerance, res.detail, time.perf_counter() - t0))
    return out
