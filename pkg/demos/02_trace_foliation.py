"""Both principal foliations, traced from seeds on two transversals.

The lifted hexagon edge x = 0 is fixed by the reflection x -> -x, so it is
itself a line of the maximal foliation: seeds on it give distinct minimal
lines but one and the same maximal line.  Maximal lines are therefore seeded
along one of the minimal lines instead.  Every line closes up; the
separatrices through the umbilics are drawn from their closed forms.

Run:  python3 demos/02_trace_foliation.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np

from curvatura import e2_seeds, explicit_separatrices, make_double_torus, make_stereo_map, trace_batch
from curvatura.export import Polyline, export_geometry

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

s = make_double_torus(1.0)
n = 8
h = 2e-3  # maximal step in R^4

mins = trace_batch(s, e2_seeds(s, n), "min", h=h)
# Interior points of the first minimal line, inside chart (+,+).
idx = np.flatnonzero(np.array(mins[0].chart_tags) == "++")
maxs = trace_batch(s, mins[0].vertices[idx[np.linspace(0, len(idx) - 1, n + 2).astype(int)[1:-1]]], "max", h=h)
traces = maxs + mins
for t in traces:
    charts = "".join(sorted(set(t.chart_tags)))
    print(f"{t.foliation:3s}  closed {t.closed}  length {t.arc_length:.6f}  "
          f"closure gap {t.closure_distance:.1e}  charts {charts}")

# Separatrices: the three pathwise loops through all four umbilics.
loops = [Polyline(sep.loop(), True, sep.label) for sep in explicit_separatrices(s.r)]

m = make_stereo_map(s)
for name in ("ply", "csv"):
    export_geometry(traces + loops, name, out / f"foliation.{name}", stereo=m)
print(f"\nwrote {out / 'foliation.ply'} and {out / 'foliation.csv'} (projected from pole {m.pole})")
