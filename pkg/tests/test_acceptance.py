"""Acceptance gate: one test and one printed verdict line per criterion.

Verdict lines print with capture disabled so they stay visible in a plain
pytest run; each line carries the measured figure next to its threshold.
"""

import time

import numpy as np
import pytest

from starfem import (
    GridFunction,
    build_stage,
    builtin_field,
    cauchy_diagnostics,
    center_flux_sum,
    center_identity_residual,
    cesaro_solution_average,
    continuum_error_norms,
    convergence_table,
    grid_norms,
    manufactured_case,
    manufactured_exact,
    manufactured_exact_deriv,
    solve_stage,
    weyl_cos_mean,
    weyl_fraction,
)

PI = np.pi


def _verdict(capsys, num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


def _info(capsys, num, detail):
    with capsys.disabled():
        print(f"criterion {num} info: {detail}", flush=True)


def test_criterion_1_center_identity_everywhere(capsys):
    families = [
        ("ex1", None), ("ex2", "n_edges"), ("ex3", None), ("ex4", None),
        ("ex5", None), ("constant", {"c": 2.0}), ("manufactured", None),
    ]
    worst = 0.0
    for family, params in families:
        for n in (2, 3, 10, 100):
            p = {"n_edges": n} if params == "n_edges" else params
            field = builtin_field(family, p, seed=0)
            stage = build_stage(n)
            for m in (10, 100):
                res = center_identity_residual(
                    solve_stage(stage, field, 0.0, m))
                worst = max(worst, res)
    _verdict(capsys, 1, worst <= 1e-10,
             f"max center identity residual {worst:.2e} <= 1e-10, "
             f"7 families x n in 2,3,10,100 x m in 10,100")


def test_criterion_2_closed_form_cases(capsys):
    stage = build_stage(4, source="explicit", coeffs=[1.0] * 4)
    pushed = solve_stage(stage, builtin_field("constant", {"c": 2.0}),
                         0.0, 100)
    t = np.arange(101) / 100
    dev_center = abs(pushed.center - 1.0)
    dev_profile = float(np.max(np.abs(pushed.values - (1.0 - t * t))))
    # with forcing present the one-sided flux misses -h by the center
    # load share, an O(1/m) defect (here exactly n c / (2 m) = 0.04)
    dev_flux_forced = abs(center_flux_sum(pushed) + pushed.h)

    datum = solve_stage(stage, builtin_field("constant", {"c": 0.0}),
                        4.0, 100)
    dev_linear = float(np.max(np.abs(datum.values - (1.0 - t))))
    # load-free case: the fluxes are -1 per edge and sum to -h exactly
    dev_flux = abs(center_flux_sum(datum) + datum.h)

    ok = (dev_center <= 1e-9 and dev_profile <= 1e-9
          and dev_linear <= 1e-12 and dev_flux <= 1e-9
          and dev_flux_forced <= 4.0 / 100 + 1e-12)
    _verdict(capsys, 2, ok,
             f"center off by {dev_center:.1e}, profile 1-t^2 off by "
             f"{dev_profile:.1e}, datum-only 1-t off by {dev_linear:.1e}, "
             f"flux sum + h = {dev_flux:.1e} (forced case O(1/m): "
             f"{dev_flux_forced:.3f})")


PUBLISHED_TABLE = {
    # n: (l2 group 1, l2 group 2, h1 group 1, h1 group 2)
    10: (0.3526, 0.1717, 0.8232, 0.3216),
    20: (0.0180, 0.0448, 0.0900, 0.0889),
    100: (0.0160, 0.0059, 0.0395, 0.0116),
    1000: (5.8352e-4, 8.27772e-4, 0.0012, 0.0016),
}


def test_criterion_3_published_first_table(capsys):
    t0 = time.perf_counter()
    rows = convergence_table("ex1", [10, 20, 100, 1000], 100, "oracle",
                             full_h1=True)
    elapsed = time.perf_counter() - t0
    got = {}
    for r in rows:
        got.setdefault(r.n, {})[r.group] = (r.l2_error, r.h1_error)
    worst = 0.0
    for n, (l2a, l2b, h1a, h1b) in PUBLISHED_TABLE.items():
        for ref, val in [(l2a, got[n][1][0]), (l2b, got[n][2][0]),
                         (h1a, got[n][1][1]), (h1b, got[n][2][1])]:
            worst = max(worst, abs(val - ref) / ref)
    strictly_below = all(
        got[1000][g][k] < got[10][g][k] for g in (1, 2) for k in (0, 1))
    ok = worst <= 0.25 and strictly_below and elapsed < 60.0
    _verdict(capsys, 3, ok,
             f"16 values within {worst:.1%} of the published table "
             f"(<= 25%), n=1000 column-wise below n=10: {strictly_below}, "
             f"{elapsed:.1f}s < 60s")


def test_criterion_4_upscaled_reference_convergence(capsys):
    ok = True
    details = []
    for example in ("ex1", "ex3"):
        rows = convergence_table(example, [10, 100, 1000], 400, "upscaled",
                                 full_h1=True)
        for g in (1, 2):
            h1 = [r.h1_error for r in rows if r.group == g]
            decreasing = h1[0] > h1[1] > h1[2]
            ok = ok and decreasing and h1[2] <= 0.05
            details.append(f"{example} g{g} {h1[0]:.3f}->{h1[1]:.3f}->"
                           f"{h1[2]:.4f}")
    printed = convergence_table("ex3", [10, 100, 1000], 400, "printed",
                                full_h1=True)
    _info(capsys, 4, "printed-reference H1 for comparison: " + ", ".join(
        f"ex3 g{r.group} n={r.n} {r.h1_error:.3f}" for r in printed))
    _verdict(capsys, 4, ok,
             "H1 vs upscaled limit decreasing and <= 0.05 at n=1000: "
             + "; ".join(details))


def test_criterion_5_manufactured_orders(capsys):
    meshes = np.array([25, 50, 100, 200])
    l2s, h1s = [], []
    for m in meshes:
        sol = manufactured_case(4, int(m))
        l2, h1 = continuum_error_norms(sol.edge_grid(1), manufactured_exact,
                                       manufactured_exact_deriv)
        l2s.append(l2)
        h1s.append(h1)
    logh = np.log(1.0 / meshes)
    l2_order = float(np.polyfit(logh, np.log(l2s), 1)[0])
    h1_order = float(np.polyfit(logh, np.log(h1s), 1)[0])
    ok = abs(l2_order - 2.0) <= 0.2 and abs(h1_order - 1.0) <= 0.2
    _verdict(capsys, 5, ok,
             f"L2 order {l2_order:.3f} in 2.0+-0.2, "
             f"H1 order {h1_order:.3f} in 1.0+-0.2 over m=25..200")


def test_criterion_6_noisy_family_robustness(capsys):
    m = 100
    zero = GridFunction(m=m, values=np.zeros(m + 1))
    passed = 0
    worst = 0.0
    for seed in range(20):
        stage = build_stage(1000, source="random", seed=seed)
        field = builtin_field("ex2", {"n_edges": 1000}, seed=seed)
        sol = solve_stage(stage, field, 0.0, m)
        errs = [grid_norms(cesaro_solution_average(sol, g), zero)[0]
                for g in (1, 2)]
        worst = max(worst, max(errs))
        if max(errs) <= 0.05:
            passed += 1
    _verdict(capsys, 6, passed >= 18,
             f"{passed}/20 seeds with both group L2 errors <= 0.05 "
             f"(need 18), worst run {worst:.3f}")


def test_criterion_7_non_convergence_signature(capsys):
    rows = cauchy_diagnostics("ex5", [500, 1000], window=10, m=200)
    eps = {(r.n, r.group): r.epsilon for r in rows}
    r1 = eps[(1000, 1)] / eps[(500, 1)]
    r2 = eps[(1000, 2)] / eps[(500, 2)]
    ok = r1 >= 5.0 and r2 >= 5.0
    _verdict(capsys, 7, ok,
             f"epsilon(1000)/epsilon(500) = {r1:.1f} and {r2:.1f}, "
             f"both >= 5")


def test_criterion_8_equidistribution(capsys):
    frac = weyl_fraction(100000, (0.0, PI))
    cmean = weyl_cos_mean(1000)
    ok = 0.49 <= frac <= 0.51 and cmean <= 2.09 / 1000
    _verdict(capsys, 8, ok,
             f"fraction {frac:.5f} in [0.49, 0.51], "
             f"|cos mean| {cmean:.2e} <= 2.09e-3")


def _best_solve_time(n, m, repeats=7):
    stage = build_stage(n)
    field = builtin_field("ex1")
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        solve_stage(stage, field, 0.0, m)
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_9_performance(capsys):
    _best_solve_time(1000, 100, repeats=2)  # warm caches and allocator
    t_mid = _best_solve_time(1000, 100)
    sizes = np.array([100, 1000, 10000])
    times = np.array([_best_solve_time(int(n), 100, repeats=5)
                      for n in sizes])
    unknowns = sizes * 99 + 1
    slope = float(np.polyfit(np.log(unknowns), np.log(times), 1)[0])
    ok = t_mid < 0.1 and 0.5 <= slope <= 2.0
    per_unknown = ", ".join(
        f"n={n}: {t / u * 1e9:.0f}ns" for n, t, u in
        zip(sizes, times, unknowns))
    _verdict(capsys, 9, ok,
             f"n=1000 m=100 solve {t_mid * 1e3:.1f}ms < 100ms, "
             f"log-log slope {slope:.2f} in [0.5, 2] ({per_unknown})")
