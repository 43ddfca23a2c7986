"""Write the small CSV/JSON fixtures used by the CLI tests.

Usage: python3 scripts/make_fixtures.py [OUTDIR]   (default: tests/data)
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from evqr import io
from evqr.measures import DiscreteMeasure

SEED = 20240501


def main(outdir: str = "tests/data") -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    n, m, d_x, d_y = 5, 7, 1, 2
    mu = DiscreteMeasure(np.full(n, 1.0 / n), rng.uniform(0, 1, (n, d_y)))
    x = rng.standard_normal((m, d_x))
    y = 0.5 * x @ np.ones((d_x, d_y)) + rng.standard_normal((m, d_y))
    w = rng.uniform(0.5, 1.5, m)
    nu = DiscreteMeasure(w / w.sum(), np.column_stack([x, y]))
    io.write_mu_csv(out / "mu_small.csv", mu)
    io.write_nu_csv(out / "nu_small.csv", nu, d_x)

    # x collapses onto a point after centering: the moment condition fails
    bad = DiscreteMeasure(np.full(3, 1 / 3), np.array([[2.0, 0.1, 0.0], [2.0, 0.4, 1.0], [2.0, -0.3, 0.5]]))
    io.write_nu_csv(out / "nu_degenerate.csv", bad, 1)

    model = {"m_y": [0.0], "sigma_xx": [[1.0]], "sigma_xy": [[0.6]], "sigma_yy": [[1.0]]}
    (out / "model_scalar.json").write_text(json.dumps(model, indent=2) + "\n")
    (out / "config.json").write_text(json.dumps({"epsilon": 0.5, "tol": 1e-10, "seed": 7}, indent=2) + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
