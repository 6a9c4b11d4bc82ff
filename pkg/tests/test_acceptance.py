"""Acceptance criteria for the flood case study and the estimator contracts.

Every test records one PASS/FAIL line (collected in conftest and printed in
the terminal summary) before asserting. All random designs use seeds fixed
up front (seed 1 unless stated) so the outcome is reproducible.
"""
from __future__ import annotations

import time
import warnings

import numpy as np
import pytest
from scipy import stats

import conftest
from gsa import models, regression, report, sampling, screening, sobol
from gsa.distributions import InputSpace, Uniform
from gsa.metamodel import fit_polynomial, sobol_via_metamodel
from oracles import grid_sobol, linear_uniform_sobol, product_sobol

SEED = 1
ACTIVE = models.FLOOD_ACTIVE

# reference values from the published flood study
SRC2_REF = {"Q": 0.28, "Ks": 0.12, "Zv": 0.15, "Hd": 0.26, "Cb": 0.03}
S_REF = np.array([0.355, 0.159, 0.183, 0.125, 0.038])
ST_REF = np.array([0.482, 0.253, 0.229, 0.181, 0.038])
S_QKS_REF = 0.06
LINEAR_Q2_REF = 0.75


def record(name: str, ok: bool, detail: str, soft: bool = False):
    status = "PASS" if ok else ("SOFT" if soft else "FAIL")
    conftest.ACCEPTANCE.append((name, status, detail))
    print(f"{status} {name}: {detail}")
    if not soft:
        assert ok, f"{name}: {detail}"


def fmt(a):
    return "(" + ", ".join(f"{v:.3f}" for v in np.atleast_1d(a)) + ")"


@pytest.fixture(scope="module")
def space():
    return models.flood_space().subset(ACTIVE)


@pytest.fixture(scope="module")
def cp_sobol(space):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sobol.NegativeIndexWarning)
        res = sobol.sobol_analysis(models.flood_model(("Cp",)), space, 10_000, SEED,
                                   fixed=models.flood_fixed(), second_order=True)
    return res, time.perf_counter() - t0


def test_criterion_01_morris_screening():
    t0 = time.perf_counter()
    design = sampling.morris_trajectories(models.flood_space(), r=10, levels=4, seed=SEED)
    ev = models.evaluate(models.flood_model(), design.sample)
    res = {out: screening.morris(design, ev[out]) for out in ("S", "Cp")}
    elapsed = time.perf_counter() - t0

    fails, notes = [], []
    for out, r in res.items():
        top = r.mu_star.max()
        for name in ("L", "B", "Zm"):
            ratio = r[name]["mu_star"] / top
            notes.append(f"{out}:{name}={ratio:.1%}")
            if ratio > 0.05:
                fails.append(f"mu*({name})/max on {out} = {ratio:.1%} > 5%")
    s = res["S"]
    for name in ACTIVE:
        if s[name]["sigma"] > 0.5 * s[name]["mu_star"]:
            fails.append(f"S: sigma({name}) > 0.5 mu*")
    cp = res["Cp"]
    ratios = {n: cp[n]["sigma"] / cp[n]["mu_star"] for n in ("Hd", "Q")}
    if max(ratios.values()) < 0.5:
        fails.append("Cp: neither Hd nor Q has sigma >= 0.5 mu*")
    if elapsed >= 1.0:
        fails.append(f"runtime {elapsed:.2f} s")
    detail = (f"mu* ratios {' '.join(notes)}; Cp sigma/mu* Hd={ratios['Hd']:.2f} Q={ratios['Q']:.2f}; "
              f"{elapsed * 1e3:.0f} ms" + (f" | {'; '.join(fails)}" if fails else ""))
    record("Criterion 1 (Morris screening)", not fails, detail)


def test_criterion_02_src_squared(space):
    t0 = time.perf_counter()
    sample = sampling.monte_carlo(space, 10_000, SEED)
    y = models.evaluate(models.flood_model(("S",)), sample, models.flood_fixed())["S"]
    res = regression.regression_indices(sample, y)
    elapsed = time.perf_counter() - t0
    src2 = res.src**2
    dev = {n: src2[j] - SRC2_REF[n] for j, n in enumerate(res.names)}
    ok = res.r_squared >= 0.95 and all(abs(v) <= 0.06 for v in dev.values()) and elapsed < 5
    record("Criterion 2 (SRC^2 on S)", ok,
           f"R2={res.r_squared:.3f}; SRC2 {fmt(src2)} vs {fmt(list(SRC2_REF.values()))}; "
           f"max |dev|={max(abs(v) for v in dev.values()):.3f} ({max(dev, key=lambda k: abs(dev[k]))}); "
           f"{elapsed:.2f} s")


def test_criterion_03_sobol_table(cp_sobol):
    res, elapsed = cp_sobol
    ds, dt = res.first - S_REF, res.total - ST_REF
    ok = np.all(np.abs(ds) <= 0.03) and np.all(np.abs(dt) <= 0.03) and elapsed < 60
    bad = [f"S_{n} off by {v:+.3f}" for n, v in zip(res.names, ds) if abs(v) > 0.03]
    bad += [f"ST_{n} off by {v:+.3f}" for n, v in zip(res.names, dt) if abs(v) > 0.03]
    record("Criterion 3 (Sobol' indices of Cp)", ok,
           f"S={fmt(res.first)} ST={fmt(res.total)} SE(S)={fmt(res.first_se)}; {elapsed:.1f} s"
           + (f" | {'; '.join(bad)}" if bad else ""))


def test_criterion_04_second_order(cp_sobol):
    res, _ = cp_sobol
    v = res.S2("Q", "Ks")
    se = res.second_se[("Q", "Ks")]
    record("Criterion 4 (S_Q,Ks on Cp)", abs(v - S_QKS_REF) <= 0.03, f"S_QKs={v:.3f} (SE {se:.3f})")


def test_criterion_05_linear_metamodel_q2(space):
    cp = models.flood_model(("Cp",))
    q2 = []
    for s in range(SEED, SEED + 20):
        x = sampling.lhs(space, 100, s)
        q2.append(fit_polynomial(x, models.evaluate(cp, x, models.flood_fixed())["Cp"], degree=1).loo_q2)
    m = float(np.mean(q2))
    record("Criterion 5 (linear metamodel LOO-Q2 on Cp)", abs(m - LINEAR_Q2_REF) <= 0.08,
           f"mean LOO-Q2 over 20 LHS designs = {m:.3f} (sd {np.std(q2, ddof=1):.3f})")


def test_criterion_06_metamodel_sobol(space, cp_sobol):
    direct, _ = cp_sobol
    x = sampling.lhs(space, 100, SEED)
    y = models.evaluate(models.flood_model(("Cp",)), x, models.flood_fixed())["Cp"]
    mm = fit_polynomial(x, y, degree=2, interactions=True, output="Cp")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sobol.NegativeIndexWarning)
        ms = sobol_via_metamodel(mm, space, 10_000, SEED)
    rel_s = np.abs(ms.result.first - direct.first) / direct.first
    rel_t = np.abs(ms.result.total - direct.total) / direct.total
    worst = max(rel_s.max(), rel_t.max())
    record("Criterion 6 (quadratic-metamodel Sobol', soft)", worst < 0.15,
           f"LOO-Q2={mm.loo_q2:.3f}; S={fmt(ms.result.first)} ST={fmt(ms.result.total)}; "
           f"rel err S {fmt(rel_s)} ST {fmt(rel_t)}; worst {worst:.1%}", soft=True)


def _oracle_check(design, y, truth, names):
    res = sobol.estimate_sobol(design, y, n_boot=200, seed=SEED)
    z = list(np.abs(res.first - truth["first"]) / res.first_se)
    z += list(np.abs(res.total - truth["total"]) / res.total_se)
    for (i, j), v in truth.get("second", {}).items():
        key = (names[i], names[j])
        z.append(abs(res.second[key] - v) / res.second_se[key])
    return res, max(z)


def test_criterion_07_oracle_equivalence():
    n = 10_000
    prod_space = InputSpace.from_pairs([("X1", Uniform(-1, 1)), ("X2", Uniform(-1, 1))])
    des = sampling.saltelli_design(prod_space, n, SEED, second_order=True)
    y = models.evaluate(models.product_model(prod_space.names), des.sample)["y"]
    grid = grid_sobol(lambda x: x[:, 0] * x[:, 1], [lambda p: 2 * p - 1] * 2)
    closed = product_sobol()
    assert np.allclose(grid["first"], closed["first"]) and np.allclose(grid["total"], closed["total"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sobol.NegativeIndexWarning)
        r1, z1 = _oracle_check(des, y, grid, prod_space.names)

    a, lo, hi = np.array([1.0, -2.0, 0.5]), np.array([0.0, -1.0, 2.0]), np.array([1.0, 3.0, 10.0])
    lin_space = InputSpace.from_pairs([(f"X{j + 1}", Uniform(l, h)) for j, (l, h) in enumerate(zip(lo, hi))])
    des2 = sampling.saltelli_design(lin_space, n, SEED, second_order=True)
    y2 = models.evaluate(models.linear_model(a, lin_space.names), des2.sample)["y"]
    grid2 = grid_sobol(lambda x: x @ a, [lambda p, l=l, h=h: l + (h - l) * p for l, h in zip(lo, hi)], 16)
    assert np.allclose(grid2["first"], linear_uniform_sobol(a, lo, hi)["first"], atol=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sobol.NegativeIndexWarning)
        r2, z2 = _oracle_check(des2, y2, grid2, lin_space.names)
    record("Criterion 7 (oracle equivalence)", max(z1, z2) <= 3,
           f"X1*X2: S={fmt(r1.first)} ST={fmt(r1.total)} S12={r1.S2('X1', 'X2'):.3f}, max z={z1:.2f}; "
           f"linear: S={fmt(r2.first)} vs {fmt(grid2['first'])}, max z={z2:.2f}")


def _random_polynomial(rng):
    d = int(rng.integers(2, 5))
    k = int(rng.integers(1, 6))
    expo = rng.integers(0, 3, size=(k, d))
    coef = rng.normal(size=k)
    lin = rng.normal(size=d)

    def f(x):
        return x @ lin + np.prod(x[:, None, :] ** expo[None], axis=2) @ coef

    lo = rng.uniform(-2, 1, size=d)
    sp = InputSpace.from_pairs([(f"x{j}", Uniform(l, l + rng.uniform(0.5, 3))) for j, l in enumerate(lo)])
    return sp, models.callable_model(f, sp.names)


def test_criterion_08_estimator_invariants():
    rng = np.random.default_rng(SEED)
    violations, checked = [], 0
    affine_err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sobol.NegativeIndexWarning)
        for m in range(50):
            sp, model = _random_polynomial(rng)
            des = sampling.saltelli_design(sp, 2000, SEED + m, second_order=True)
            y = models.evaluate(model, des.sample)["y"]
            res = sobol.estimate_sobol(des, y, n_boot=100, seed=SEED)
            checked += sp.d
            for j, name in enumerate(sp.names):
                if res.total[j] < res.first[j] - 3 * res.first_se[j]:
                    violations.append(f"model {m} {name}")
            a, b = rng.uniform(0.1, 50) * rng.choice([-1, 1]), rng.uniform(-100, 100)
            res2 = sobol.estimate_sobol(des, a * y + b, n_boot=0)
            res1 = sobol.estimate_sobol(des, y, n_boot=0)
            affine_err = max(affine_err, np.abs(res2.first - res1.first).max(),
                             np.abs(res2.total - res1.total).max(),
                             max(abs(res2.second[k] - res1.second[k]) for k in res1.second))

    lhs_ok = True
    flood = models.flood_space()
    for n in (2, 10, 97):
        u = flood.to_unit(sampling.lhs(flood, n, SEED).values)
        strata = np.floor(u * n + 1e-9).astype(int)
        lhs_ok &= all(sorted(strata[:, j]) == list(range(n)) for j in range(flood.d))

    s = sampling.monte_carlo(flood, 30_000, SEED)
    serial = models.evaluate(models.flood_model(), s, workers=1)
    parallel = models.evaluate(models.flood_model(), s, workers=4)
    par_ok = all(np.array_equal(serial[k], parallel[k]) for k in ("S", "Cp"))

    ok = not violations and affine_err <= 1e-10 and lhs_ok and par_ok
    record("Criterion 8 (estimator invariants)", ok,
           f"ST>=S-3SE violations {len(violations)}/{checked}; affine max diff {affine_err:.1e}; "
           f"LHS exact={lhs_ok}; parallel==serial={par_ok}"
           + (f" | {violations[:5]}" if violations else ""))


def test_criterion_09_distribution_layer():
    flood = models.flood_space()
    p = np.linspace(1e-6, 1 - 1e-6, 10_001)
    rt = {n: float(np.abs(d.cdf(d.quantile(p)) - p).max()) for n, d in flood}
    rng = np.random.default_rng(SEED)
    ks = {n: stats.kstest(d.sample(100_000, rng), d.cdf).statistic for n, d in flood}
    ok = max(rt.values()) <= 1e-8 and max(ks.values()) <= 0.01
    record("Criterion 9 (distribution layer)", ok,
           f"max round-trip error {max(rt.values()):.1e}; max KS {max(ks.values()):.4f} "
           f"({max(ks, key=ks.get)})")


def test_criterion_10_cobweb(space):
    s = sampling.monte_carlo(space, 10_000, SEED)
    ev = models.evaluate(models.flood_model(("S",)), s, models.flood_fixed())
    cw = report.cobweb(ev, "S", 0.05)
    top = cw.highlight
    q, ks = s.column("Q"), s.column("Ks")
    se_q = q[top].std(ddof=1) / np.sqrt(top.sum())
    se_ks = ks[top].std(ddof=1) / np.sqrt(top.sum())
    ok = q[top].mean() > q.mean() + 2 * se_q and ks[top].mean() < ks.mean() - 2 * se_ks
    record("Criterion 10 (cobweb: top-5% S)", ok,
           f"{top.sum()} rows; mean Q {q[top].mean():.0f} vs {q.mean():.0f} (SE {se_q:.0f}); "
           f"mean Ks {ks[top].mean():.1f} vs {ks.mean():.1f} (SE {se_ks:.2f})")
