"""Flood case study end to end: screening, regression, Sobol' indices and surrogates.

    python3 scripts/reproduce_flood.py [--seed 1] [--n-sobol 10000] [--workers 4]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gsa import models, regression, sampling, screening, sobol
from gsa.metamodel import fit_polynomial, sobol_via_metamodel

ACTIVE = models.FLOOD_ACTIVE


def section(title: str) -> None:
    print(f"\n== {title}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n-sobol", type=int, default=10_000)
    ap.add_argument("--n-src", type=int, default=10_000)
    ap.add_argument("--q2-seeds", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    full = models.flood_space()
    space = full.subset(ACTIVE)
    fixed = models.flood_fixed()
    flood = models.flood_model()

    section("Morris screening, 8 inputs, r=10, 4 levels")
    t0 = time.perf_counter()
    design = sampling.morris_trajectories(full, r=10, levels=4, seed=args.seed)
    ev = models.evaluate(flood, design.sample)
    for out in ("S", "Cp"):
        res = screening.morris(design, ev[out])
        top = res.mu_star.max()
        print(f"{out}:")
        for name, mu, ms, sd, group in res.rows():
            print(f"  {name:>3}  mu*={ms:9.4g} ({ms / top:6.1%})  sigma/mu*={sd / ms if ms else 0:5.2f}  {group}")
    print(f"({time.perf_counter() - t0:.2f} s)")

    section(f"Linear regression on S, Monte Carlo n={args.n_src}")
    sample = sampling.monte_carlo(space, args.n_src, args.seed)
    ys = models.evaluate(models.flood_model(("S",)), sample, fixed)["S"]
    ri = regression.regression_indices(sample, ys)
    print(f"R2 = {ri.r_squared:.4f}")
    for name, s in zip(ri.names, ri.src):
        print(f"  {name:>3}  SRC2={s * s:.3f}")

    section(f"Sobol' indices of Cp, base n={args.n_sobol}, second order")
    t0 = time.perf_counter()
    res = sobol.sobol_analysis(models.flood_model(("Cp",)), space, args.n_sobol, args.seed, fixed=fixed,
                               second_order=True, workers=args.workers)
    for j, name in enumerate(res.names):
        print(f"  {name:>3}  S={res.first[j]:.3f} +/- {res.first_se[j]:.3f}   "
              f"ST={res.total[j]:.3f} +/- {res.total_se[j]:.3f}")
    print(f"  S(Q,Ks) = {res.S2('Q', 'Ks'):.3f} +/- {res.second_se[('Q', 'Ks')]:.3f}")
    print(f"({time.perf_counter() - t0:.2f} s)")

    section(f"Linear metamodel of Cp, LHS n=100, LOO Q2 over {args.q2_seeds} seeds")
    cp = models.flood_model(("Cp",))
    q2s = []
    for s in range(args.q2_seeds):
        x = sampling.lhs(space, 100, args.seed + s)
        q2s.append(fit_polynomial(x, models.evaluate(cp, x, fixed)["Cp"], degree=1).loo_q2)
    print(f"mean Q2 = {np.mean(q2s):.3f} (sd {np.std(q2s, ddof=1):.3f})")

    section("Quadratic metamodel of Cp (n=100) and its Sobol' indices")
    x = sampling.lhs(space, 100, args.seed)
    mm = fit_polynomial(x, models.evaluate(cp, x, fixed)["Cp"], degree=2, interactions=True, output="Cp")
    ms = sobol_via_metamodel(mm, space, args.n_sobol, args.seed)
    print(f"LOO Q2 = {mm.loo_q2:.3f}; unexplained variance {ms.unexplained:.3f}")
    for j, name in enumerate(ms.result.names):
        print(f"  {name:>3}  S={ms.result.first[j]:.3f} (direct {res.first[j]:.3f})   "
              f"ST={ms.result.total[j]:.3f} (direct {res.total[j]:.3f})")


if __name__ == "__main__":
    main()
