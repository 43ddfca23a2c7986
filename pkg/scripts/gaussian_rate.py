"""Tabulate W2^2(pi_eps, pi_o) against its first-order term for a Gaussian model.

Usage: python3 scripts/gaussian_rate.py [MODEL_JSON] [--grid 1e-1,1e-2,1e-3,1e-4]

Without a model file the scalar model S_xx = 1, S_xy = 0.6, S_yy = 1 is used,
whose first-order coefficient is 0.4.
"""
from __future__ import annotations

import argparse

from evqr.gaussian import GaussianModel, lambda_eps, sweep_epsilon, w2_first_order

SCALAR = {"m_y": [0.0], "sigma_xx": [[1.0]], "sigma_xy": [[0.6]], "sigma_yy": [[1.0]]}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model", nargs="?")
    ap.add_argument("--grid", default="1e-1,3e-2,1e-2,3e-3,1e-3,3e-4,1e-4")
    args = ap.parse_args()
    model = GaussianModel.from_json(args.model) if args.model else GaussianModel.from_dict(SCALAR)
    grid = [float(t) for t in args.grid.split(",")]
    print(f"first-order coefficient tr(L^-1 Lam_o) = {w2_first_order(model):.12g}")
    print(f"Lam_o =\n{lambda_eps(model, 0.0)}")
    print(f"{'eps':>10} {'W2^2 exact':>14} {'eps*coef':>14} {'ratio':>12} {'resid/eps^2':>13}")
    for r in sweep_epsilon(model, grid):
        print(f"{r.epsilon:10.1e} {r.w2_exact:14.6e} {r.first_order:14.6e} {r.ratio:12.8f} {r.residual_over_eps2:13.6f}")


if __name__ == "__main__":
    main()
