"""Command-line entry point: ``curvatura <command> [flags]``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags (highest precedence).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .checks import CheckContext, run_checks
from .errors import CertificationFailure, CurvaturaError, NoConvergence
from .export import FORMATS, Polyline, export_geometry, json_text, report_payload
from .field4 import make_double_torus, project_batch
from .stereo import make_stereo_map, mesh_double_torus
from .tracer import build_cw_complex, e2_seeds, explicit_separatrices, separatrix_residuals, trace_batch
from .umbilic import ThetaSystem, find_umbilics, monge_chart_jet, separatrix_slopes

log = logging.getLogger("curvatura")

COMMANDS = ("umbilics", "slopes", "trace", "separatrices", "mesh", "verify")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    radius: float = 1 / math.sqrt(10)
    p: int = 2
    q: int = 3
    step: float | None = None
    closure_tol: float | None = None
    seeds: int = 20
    mesh_n: int = 32
    out: str = "out"
    pole: tuple[float, ...] | None = None
    format: str = "ply,csv"
    quick: bool = False

    @property
    def formats(self) -> list[str]:
        out = [f.strip().lower() for f in self.format.split(",") if f.strip()]
        bad = [f for f in out if f not in FORMATS]
        if bad:
            raise ValueError(f"unknown format(s) {bad}; choose from {', '.join(FORMATS)}")
        return out

    def to_text(self) -> str:
        """Flat ``key = value`` lines; ``from_text`` inverts this exactly."""
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        updates = {}
        known = {f.name for f in fields(cls)}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"config line {n}: unknown key {key!r}")
            updates[key] = _parse_value(key, value)
        return replace(base, **updates)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, tuple):
        return ",".join("%.17g" % c for c in v)
    return str(v)


def _parse_bool(value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_pole(value: str) -> tuple[float, ...]:
    parts = [float(c) for c in value.replace(" ", "").split(",")]
    if len(parts) != 4:
        raise ValueError("pole needs four comma-separated coordinates")
    return tuple(parts)


_PARSERS = {
    "radius": float,
    "p": int,
    "q": int,
    "step": float,
    "closure_tol": float,
    "seeds": int,
    "mesh_n": int,
    "out": str,
    "pole": _parse_pole,
    "format": str,
    "quick": _parse_bool,
}


def _parse_value(key: str, value: str):
    if value.lower() == "none" and key in ("step", "closure_tol", "pole"):
        return None
    return _PARSERS[key](value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # Every flag defaults to None so that only flags given explicitly override the config file.
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--radius", type=float, help="sphere radius r (default 1/sqrt(10))")
    common.add_argument("--p", type=int, help="exponent of the first complex coordinate")
    common.add_argument("--q", type=int, help="exponent of the second complex coordinate")
    common.add_argument("--step", type=float, help="maximal tracing step (default 1e-3 r)")
    common.add_argument("--closure-tol", dest="closure_tol", type=float, help="closure radius (default 10 step)")
    common.add_argument("--seeds", type=int, help="number of seeds along the lifted edge e2")
    common.add_argument("--mesh-n", dest="mesh_n", type=int, help="mesh samples per hexagon edge")
    common.add_argument("--pole", type=_parse_pole, help="projection pole as x,y,u,v")
    common.add_argument("--format", help=f"comma-separated output formats from {', '.join(FORMATS)}")
    common.add_argument("--out", help="output directory")
    common.add_argument("--quick", action="store_const", const=True, help="reduce sample sizes tenfold")
    parser = argparse.ArgumentParser(prog="curvatura", description="Lines of curvature of link surfaces in S^3.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("umbilics", parents=[common], help="certify and report the umbilics")
    sub.add_parser("slopes", parents=[common], help="separatrix slopes at each umbilic")
    tr = sub.add_parser("trace", parents=[common], help="trace both foliations from seeds")
    tr.add_argument("--start", action="append", type=_parse_pole, default=[], help="explicit seed x,y,u,v (repeatable)")
    sub.add_parser("separatrices", parents=[common], help="export the explicit separatrices")
    sub.add_parser("mesh", parents=[common], help="mesh the surface and export it projected to R^3")
    sub.add_parser("verify", parents=[common], help="run the invariant battery")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_text(Path(args.config).read_text(), cfg)
    updates = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}
    return replace(cfg, **updates)


def _surface(cfg: RunConfig):
    return make_double_torus(cfg.radius, cfg.p, cfg.q)


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_geometry(cfg, items, stem, stereo) -> list[Path]:
    written = []
    for f in cfg.formats:
        if f == "json":
            continue
        written.append(export_geometry(items, f, _outdir(cfg) / f"{stem}.{f}", stereo=stereo))
    return written


def cmd_umbilics(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    s = _surface(cfg)
    step = s.r / (20 if cfg.quick else 200)
    reports, cert = find_umbilics(s, sweep_step=step, return_certificate=True)
    payload = report_payload(s.r, reports, extra={"certificate": cert.method})
    text = json_text(payload)
    out.write(text)
    (_outdir(cfg) / "umbilics.json").write_text(text)
    return EXIT_OK


def cmd_slopes(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    s = _surface(cfg)
    reports = find_umbilics(s, sweep=False)
    records = []
    for rep in reports:
        jet = monge_chart_jet(s, rep.position)
        records.append({"position": list(rep.position), "slopes": separatrix_slopes(jet), "m": jet.m, "n": jet.n})
        out.write("umbilic (" + ", ".join("%.12g" % c for c in rep.position) + "): slopes " + ", ".join("%.15g" % p for p in rep.slopes) + "\n")
    (_outdir(cfg) / "slopes.json").write_text(json_text({"radius": s.r, "slopes": records}))
    return EXIT_OK


def cmd_trace(cfg: RunConfig, starts=(), out=None) -> int:
    out = out or sys.stdout
    s = _surface(cfg)
    if starts:
        raw = np.array(starts, float)
        seeds, _, ok = project_batch(s, raw)
        if not ok.all():
            raise NoConvergence(f"seed {int(np.argmin(ok))} could not be projected onto the surface")
        for i, (a, b) in enumerate(zip(raw, seeds)):
            moved = float(np.linalg.norm(a - b))
            if moved > s.eps_surf:
                log.info("seed %d was off the surface; projected onto it (moved %.3e)", i, moved)
    else:
        n = max(1, cfg.seeds // 10) if cfg.quick else cfg.seeds
        seeds = e2_seeds(s, n)
    n = len(seeds)
    h = cfg.step or 1e-3 * s.r
    traces = trace_batch(
        s, np.concatenate([seeds, seeds]), ["max"] * n + ["min"] * n, h=h,
        eps_close=cfg.closure_tol,
    )
    stereo = make_stereo_map(s, cfg.pole)
    _write_geometry(cfg, traces, "traces", stereo)
    for fol in ("max", "min"):
        sel = [t for t in traces if t.foliation == fol]
        out.write(f"{fol} foliation closed: {sum(t.closed for t in sel)}/{len(sel)}\n")
    out.write(f"closed: {sum(t.closed for t in traces[:n])}/{n} seeds (max), {sum(t.closed for t in traces[n:])}/{n} seeds (min)\n")
    return EXIT_OK if all(t.closed for t in traces) else EXIT_FAIL


def cmd_separatrices(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    s = _surface(cfg)
    seps = explicit_separatrices(s.r)
    lines = []
    for sep in seps:
        surf, quad = separatrix_residuals(s, sep, 100 if cfg.quick else 1000)
        out.write(f"{sep.label}: surface residual {surf:.3e}, quadratic residual {quad:.3e}\n")
        lines.append(Polyline(sep.loop(), True, sep.label))
    _write_geometry(cfg, lines, "separatrices", make_stereo_map(s, cfg.pole))
    return EXIT_OK


def cmd_mesh(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    s = _surface(cfg)
    mesh = mesh_double_torus(s, cfg.mesh_n)
    _write_geometry(cfg, mesh, "mesh", make_stereo_map(s, cfg.pole))
    cw = build_cw_complex(s)
    out.write(
        f"mesh n={cfg.mesh_n}: {len(mesh.vertices)} vertices, {len(mesh.faces)} faces, "
        f"chi {mesh.euler_characteristic}, closed {mesh.is_closed()}, orientable {mesh.is_orientable()}\n"
    )
    v, e, f = cw.counts
    out.write(f"CW cells: {v} - {e} + {f} = {cw.euler_characteristic}\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, theta: ThetaSystem | None = None, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    s = _surface(cfg)
    ctx = CheckContext(s, theta or ThetaSystem(), quick=cfg.quick, h=cfg.step, seeds=cfg.seeds)
    results = run_checks(ctx)
    for r in results:
        err.write(f"{r.status.upper():7s} {r.name:22s} {r.detail} ({r.seconds:.2f} s)\n")
    ok = all(r.passed for r in results)
    failed = [r.name for r in results if not r.passed]
    chi = build_cw_complex(s).euler_characteristic if ctx.double_torus else None
    payload = {
        "radius": s.r,
        "passed": ok,
        "failed": failed,
        "euler_characteristic": chi,
        "checks": [r.to_dict() for r in results],
    }
    text = json_text(payload)
    out.write(text)
    (_outdir(cfg) / "verify.json").write_text(text)
    for name in failed:
        err.write(f"invariant failed: {name}\n")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.formats  # validate early
        if args.command == "umbilics":
            return cmd_umbilics(cfg)
        if args.command == "slopes":
            return cmd_slopes(cfg)
        if args.command == "trace":
            return cmd_trace(cfg, args.start)
        if args.command == "separatrices":
            return cmd_separatrices(cfg)
        if args.command == "mesh":
            return cmd_mesh(cfg)
        return cmd_verify(cfg)
    except CertificationFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    except (CurvaturaError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
