"""CSV and JSON persistence of estimator runs.

CSV columns are exactly ``t,lower_1..lower_n,upper_1..upper_n`` plus a
trailing ``sigma`` column for switched systems.  ``sigma`` at row t is the
mode driving the step from t to t+1; the final row, having no outgoing
step, carries -1.  A JSON sidecar with the same stem holds estimator
metadata and stability certificates.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def csv_header(n, switched=False):
    cols = ["t"] + [f"lower_{i}" for i in range(1, n + 1)] + [f"upper_{i}" for i in range(1, n + 1)]
    return cols + ["sigma"] if switched else cols


def write_run_csv(run, path, sigma=None):
    path = Path(path)
    T = run.horizon
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(csv_header(run.n, sigma is not None))
        for t in range(T + 1):
            row = [t] + [repr(float(x)) for x in run.lower[t]] + [repr(float(x)) for x in run.upper[t]]
            if sigma is not None:
                row.append(int(sigma[t]) if t < min(T, len(sigma)) else -1)
            wr.writerow(row)
    return path


def read_run_csv(path):
    """Return ``(header, lower, upper, sigma or None)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("lower_"))
    data = np.array([[float(x) for x in r] for r in body])
    sigma = data[:, -1].astype(int) if header[-1] == "sigma" else None
    return header, data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n], sigma


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def dumps(obj, **kw):
    return json.dumps(_jsonable(obj), indent=2, **kw)


def write_sidecar(run, path, scenario=None, certificates=None):
    meta = dict(run.meta)
    meta.pop("sigma", None)
    doc = {
        "label": run.label,
        "kind": run.kind,
        "q": run.q,
        "horizon": run.horizon,
        "n": run.n,
        "columns": csv_header(run.n, scenario is not None and scenario.is_sls),
        "gains": None if run.gains is None else [np.asarray(L).tolist() for L in run.gains],
        "meta": meta,
        "scenario": None if scenario is None else scenario.name,
        "certificates": certificates,
    }
    Path(path).write_text(dumps(doc))
    return Path(path)
