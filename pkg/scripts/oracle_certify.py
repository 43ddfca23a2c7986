"""Compare the block solver with the dense Newton oracle on random small instances.

Usage: python3 scripts/oracle_certify.py [--count 100] [--seed 0] [--eps 0.1,1]

Prints the worst coupling, value and potential gaps and the sweep counts.
"""
from __future__ import annotations

import argparse

import numpy as np

from evqr.measures import DiscreteMeasure, Problem
from evqr.oracle import oracle_compare


def random_instance(rng: np.random.Generator, eps: float) -> Problem:
    d_x, d_y = int(rng.integers(0, 3)), int(rng.integers(1, 3))
    n, m = int(rng.integers(2, 7)), int(rng.integers(d_x + 1, 7))
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
    x = rng.standard_normal((m, d_x))
    y = rng.standard_normal((m, d_y)) + x @ rng.standard_normal((d_x, d_y))
    return Problem(DiscreteMeasure(a, rng.uniform(-1, 1, (n, d_y))), DiscreteMeasure(b, np.column_stack([x, y])), eps)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", default="0.1,1")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    eps_list = [float(e) for e in args.eps.split(",")]
    worst = np.zeros(3)
    sweeps = []
    for _ in range(args.count):
        c = oracle_compare(random_instance(rng, float(rng.choice(eps_list))))
        worst = np.maximum(worst, [c.coupling_l1_gap, c.value_gap, c.potential_sup_gap])
        sweeps.append(c.solver_sweeps)
    print(f"instances: {args.count}, eps in {eps_list}")
    print(f"max coupling L1 gap   {worst[0]:.3e}")
    print(f"max relative value gap {worst[1]:.3e}")
    print(f"max potential sup gap {worst[2]:.3e}")
    print(f"block sweeps: median {int(np.median(sweeps))}, max {max(sweeps)}")


if __name__ == "__main__":
    main()
