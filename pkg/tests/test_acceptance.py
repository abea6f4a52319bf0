"""Acceptance gate: every shipped claim, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines; each
test asserts its criterion at the stated tolerance, so a plain pytest run
enforces the same gate silently.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from koopcontrol.basis import BasisSpec, DomainBox, inner_product
from koopcontrol.koopman import KoopmanModel
from koopcontrol.mapinv import invert_map
from koopcontrol.models import (CwConfig, DuffingParams, cw_dynamics,
                                duffing_dynamics, potential_polynomial,
                                potential_term_rational)
from koopcontrol.oracles import integrate
from koopcontrol.polynomial import MultiPoly, PolyMap, monomials_upto
from koopcontrol.scenario import (Pipeline, Scenario, build_problem,
                                  run_grid, run_sweep)

F = Fraction

CW_LEO = {"semi_major_axis": 6678000.0}
X0_DAY = [-2077.2, 4515.7, -0.086074, 4.2376]
LAM_R_PRINTED = np.array([-4.3659e-11, 1.6400e-13]) * 1e3  # km -> m units
LAM_V_PRINTED = np.array([-1.0017e-9, -1.5900e-8]) * 1e3


def _report(number, name, checks):
    """One PASS/FAIL line per criterion; checks is [(ok, detail), ...]."""
    ok = all(c[0] for c in checks)
    detail = "; ".join(c[1] for c in checks)
    print(f"[{number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def day_scenario(solver="koopman"):
    return Scenario.from_dict({
        "model": "cw",
        "model_params": dict(CW_LEO, k_max=2, planar=True),
        "x0": X0_DAY, "tf": 86400.0, "max_order": 3, "solver": solver,
    })


def test_1_linear_cw_costates_match_closed_form():
    pipeline = Pipeline()
    t0 = time.perf_counter()
    koop, _ = pipeline.solve(day_scenario())
    wall = time.perf_counter() - t0
    stm, _ = pipeline.solve(day_scenario(solver="stm-oracle"))

    lam_k = np.asarray(koop.lam0)
    lam_s = np.asarray(stm.lam0)
    rel_stm = np.abs(lam_k - lam_s) / np.abs(lam_s)
    printed = np.concatenate([LAM_R_PRINTED, LAM_V_PRINTED])
    rel_printed = np.abs(lam_k - printed) / np.abs(printed)

    _report(1, "one-day-rendezvous-costates", [
        (np.all(rel_stm <= 0.02),
         f"vs closed form max {rel_stm.max():.3%} (limit 2%)"),
        (np.all(rel_printed <= 0.05),
         f"vs published values max {rel_printed.max():.3%} (limit 5%)"),
        (wall <= 60.0, f"runtime {wall:.1f} s (limit 60 s)"),
    ])


def test_2_linear_cw_closed_loop():
    pipeline = Pipeline()
    stm, _ = pipeline.solve(day_scenario(solver="stm-oracle"))
    koop, _ = pipeline.solve(day_scenario())
    _report(2, "one-day-rendezvous-terminal", [
        (stm.terminal["relative"] <= 1e-8,
         f"closed-form relative miss {stm.terminal['relative']:.3e} "
         "(limit 1e-8)"),
        (koop.terminal["relative"] <= 1e-2,
         f"map relative miss {koop.terminal['relative']:.3e} (limit 1e-2)"),
    ])


def test_3_duffing_sweep_and_grid():
    checks = []
    sweep_sc = Scenario.from_dict({
        "model": "duffing", "x0": [1.0, 0.0],
        "tf_list": [float(t) for t in range(2, 11)],
    })
    out = run_sweep(sweep_sc)
    oks = [p for p in out["points"] if p["status"] == "ok"]
    checks.append((len(oks) == 9, f"{len(oks)}/9 horizons solved"))
    worst_term = max(p["report"]["terminal_error"]["absolute"] for p in oks)
    checks.append((worst_term <= 1e-2,
                   f"worst terminal miss {worst_term:.3e} (limit 1e-2)"))
    checks.append((out["efforts_non_increasing"] is True,
                   "efforts non-increasing in tf"))

    pipeline = Pipeline()
    worst_shoot = 0.0
    for p in oks:
        sc = Scenario.from_dict({"model": "duffing", "x0": [1.0, 0.0],
                                 "tf": p["tf"], "solver": "shooting",
                                 "verify": False})
        shoot, _ = pipeline.solve(sc)
        lam_k = np.asarray(p["report"]["lam0"])
        lam_s = np.asarray(shoot.lam0)
        worst_shoot = max(worst_shoot,
                          float(np.max(np.abs(lam_k - lam_s)
                                       / np.abs(lam_s))))
    checks.append((worst_shoot <= 0.05,
                   f"vs shooting max {worst_shoot:.3%} (limit 5%)"))

    grid_sc = Scenario.from_dict({
        "model": "duffing", "tf": 2.0,
        "grid": {"points": [[q, p] for q in (-1.0, -0.5, 0.5, 1.0)
                            for p in (-1.0, 0.0, 1.0)]},
    })
    gout = run_grid(grid_sc)
    checks.append((gout["succeeded"] == 12,
                   f"{gout['succeeded']}/12 grid starts solved"))
    _report(3, "duffing-horizon-sweep-and-grid", checks)


def test_4_potential_table_and_linear_reduction(tmp_path):
    checks = []
    expected = {
        0: {(0, 0, 0): F(1)},
        1: {(1, 0, 0): F(-1)},
        3: {(3, 0, 0): F(-1), (1, 2, 0): F(3, 2), (1, 0, 2): F(3, 2)},
        5: {(5, 0, 0): F(-1), (3, 2, 0): F(5), (3, 0, 2): F(5),
            (1, 4, 0): F(-15, 8), (1, 0, 4): F(-15, 8),
            (1, 2, 2): F(-15, 4)},
    }
    exact = all(potential_term_rational(k) == v for k, v in expected.items())
    checks.append((exact, "orders 0,1,3,5 exact rationals"))

    cfg = CwConfig(k_max=2, normalize=False, **CW_LEO)
    n = cfg.mean_motion
    dyn = cw_dynamics(cfg)
    linear_rows = [
        MultiPoly(6, {(1, 0, 0, 0, 0, 0): 3 * n * n,
                      (0, 0, 0, 0, 1, 0): 2 * n}),
        MultiPoly(6, {(0, 0, 0, 1, 0, 0): -2 * n}),
        MultiPoly(6, {(0, 0, 1, 0, 0, 0): -n * n}),
    ]
    linear_ok = all((a - b).max_abs_coef() <= 1e-12 * n
                    for a, b in zip(dyn.components, linear_rows))
    checks.append((linear_ok,
                   "order-2 reduction equals the linear relative-motion "
                   "rows (including the -n^2 z sign)"))

    # the published table's order-2 and order-4 entries disagree with the
    # generating recurrence; record the mismatch in a report file
    q2 = potential_polynomial(2, cfg)
    q4 = potential_polynomial(4, cfg)
    got_q2 = q2.terms[(0, 2, 0)]
    got_q4 = q4.terms[(0, 4, 0)]
    q2_mismatch = abs(-0.5 * cfg.semi_major_axis ** 2 - got_q2) \
        > 1e6 * abs(got_q2)
    q4_ratio = (3.0 * n * n / cfg.semi_major_axis ** 2) / got_q4
    report = tmp_path / "potential_table_mismatches.txt"
    report.write_text(
        "order 2: published second piece scales with a^2, recurrence "
        f"gives n^2 (got {got_q2:.6e}, a^2 form {-0.5 * cfg.semi_major_axis ** 2:.6e})\n"
        f"order 4: published rho^4 coefficient is 8x the recurrence "
        f"value (ratio {q4_ratio:.3f})\n")
    checks.append((q2_mismatch and abs(q4_ratio - 8.0) <= 1e-9
                   and report.exists(),
                   f"table discrepancies documented in {report.name}"))
    _report(4, "potential-table-and-reduction", checks)


def test_5_high_order_rendezvous():
    sc = Scenario.from_dict({
        "model": "cw", "model_params": dict(CW_LEO, k_max=6),
        "x0": [0.0, 10000.0, 0.0, 0.0, 0.0, 0.0],
        "tf": 43200.0, "max_order": 3,
    })
    pipeline = Pipeline()
    koop, _ = pipeline.solve(sc)
    sc_lin = Scenario.from_dict({
        "model": "cw", "model_params": dict(CW_LEO, k_max=6),
        "x0": [0.0, 10000.0, 0.0, 0.0, 0.0, 0.0],
        "tf": 43200.0, "max_order": 3, "solver": "stm-oracle",
    })
    lin, _ = pipeline.solve(sc_lin)
    sc_shoot = Scenario.from_dict({
        "model": "cw", "model_params": dict(CW_LEO, k_max=6),
        "x0": [0.0, 10000.0, 0.0, 0.0, 0.0, 0.0],
        "tf": 43200.0, "max_order": 3, "solver": "shooting", "verify": False,
    })
    shoot, _ = pipeline.solve(sc_shoot)

    e_koop = koop.position_error_m
    e_lin = lin.position_error_m
    lam_k = np.asarray(koop.lam0)
    lam_s = np.asarray(shoot.lam0)
    big = np.abs(lam_s) >= 1e-2 * np.abs(lam_s).max()
    shoot_rel = np.max(np.abs(lam_k[big] - lam_s[big]) / np.abs(lam_s[big]))

    _report(5, "ten-km-half-day-rendezvous", [
        (e_koop <= 100.0,
         f"terminal miss {e_koop:.3g} m (limit 1% of 10 km)"),
        (e_lin >= 10.0 * e_koop,
         f"linear-design miss {e_lin:.3g} m, {e_lin / e_koop:.0f}x worse "
         "(needs >= 10x)"),
        (shoot_rel <= 0.05,
         f"vs shooting max {shoot_rel:.3%} on significant components "
         "(limit 5%)"),
    ])


def test_6_direction_grid():
    sc = Scenario.from_dict({
        "model": "cw", "model_params": dict(CW_LEO, k_max=6),
        "tf": 14400.0, "max_order": 3,
        "grid": {"circle": {"radius": 2000.0, "count": 8}},
    })
    t0 = time.perf_counter()
    out = run_grid(sc)
    wall = time.perf_counter() - t0
    oks = [p for p in out["points"] if p["status"] == "ok"]
    worst = max(p["report"]["position_error_m"] for p in oks) \
        if len(oks) == 8 else math.inf
    shared = all(p["report"]["cached_map"] for p in out["points"][1:]) \
        if len(oks) == 8 else False
    _report(6, "eight-direction-circle-grid", [
        (len(oks) == 8, f"{len(oks)}/8 directions solved"),
        (worst <= 20.0, f"worst terminal miss {worst:.3g} m (limit 20 m)"),
        (shared, "one inverted map shared across directions"),
        (wall <= 600.0, f"runtime {wall:.1f} s (limit 600 s)"),
    ])


def test_7_map_inversion_suite():
    rng = np.random.default_rng(20240819)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 7))
        order = int(rng.integers(2, 5))
        exps = monomials_upto(dim, order)
        L = rng.normal(size=(dim, dim))
        L += np.sign(np.diag(L)) * np.eye(dim) * dim
        comps = []
        for i in range(dim):
            terms = {}
            for j in range(dim):
                e = [0] * dim
                e[j] = 1
                terms[tuple(e)] = L[i, j]
            for e in exps:
                if sum(e) >= 2 and rng.uniform() < 0.3:
                    terms[e] = 0.1 * rng.normal()
            comps.append(MultiPoly(dim, terms))
        _, residual = invert_map(PolyMap(comps), order)
        worst = max(worst, residual)

    fwd = PolyMap([MultiPoly(1, {(1,): 1.0, (2,): 1.0})])
    inv, _ = invert_map(fwd, 4)
    series = [inv.components[0].terms.get((k,), 0.0) for k in range(1, 5)]
    series_err = np.max(np.abs(np.array(series) - [1.0, -1.0, 2.0, -5.0]))

    _report(7, "map-inversion-residuals", [
        (worst <= 1e-9,
         f"worst of 100 random maps {worst:.3e} (limit 1e-9)"),
        (series_err <= 1e-12,
         f"series reversion error {series_err:.3e} (limit 1e-12)"),
    ])


def test_8_basis_exactness():
    spec = BasisSpec(3, 4)
    funcs = spec.basis_functions()
    G = np.empty((spec.size, spec.size))
    for i in range(spec.size):
        for j in range(i, spec.size):
            G[i, j] = G[j, i] = inner_product(funcs[i], funcs[j])
    gram_err = float(np.max(np.abs(G - np.eye(spec.size))))

    x, w = np.polynomial.legendre.leggauss(8)
    rng = np.random.default_rng(20240820)
    exps = monomials_upto(2, 3)
    worst = 0.0
    for _ in range(100):
        pa = MultiPoly(2, {exps[i]: float(rng.normal())
                           for i in rng.choice(len(exps), 4, replace=False)})
        pb = MultiPoly(2, {exps[i]: float(rng.normal())
                           for i in rng.choice(len(exps), 4, replace=False)})
        prod = pa * pb
        quad = sum(w[i] * w[j] * prod.evaluate(np.array([x[i], x[j]]))
                   for i in range(8) for j in range(8))
        worst = max(worst, abs(inner_product(pa, pb) - quad))

    _report(8, "legendre-galerkin-exactness", [
        (gram_err <= 1e-12,
         f"Gram deviation {gram_err:.3e} at 3 vars order 4 (limit 1e-12)"),
        (worst <= 1e-12,
         f"quadrature mismatch {worst:.3e} over 100 pairs (limit 1e-12)"),
    ])


def test_9_propagation_accuracy():
    dyn = duffing_dynamics(DuffingParams())
    model = KoopmanModel.build(dyn, BasisSpec(2, 4),
                               DomainBox.centered([1.2, 1.2]))
    period = 2.0 * np.pi
    ts = np.linspace(0.0, period, 200)
    pred = model.propagate([1.0, 0.0], ts)
    truth = integrate(dyn, [1.0, 0.0], period, rtol=1e-12, atol=1e-13,
                      t_eval=ts)
    dev = float(np.max(np.abs(pred - truth.states)))

    worst_id = 0.0
    for prob_model, params, order in (("duffing", {}, 4),
                                      ("cw", dict(CW_LEO, k_max=2,
                                                  planar=True), 2),
                                      ("cw", dict(CW_LEO, k_max=6), 2)):
        prob = build_problem(prob_model, params)
        m = KoopmanModel.build(prob.system.dynamics,
                               BasisSpec(prob.system.dim, order),
                               DomainBox.centered([1.0] * prob.system.dim))
        worst_id = max(worst_id, float(np.max(np.abs(
            m.flow_matrix(0.0) - np.eye(m.spec.size)))))

    _report(9, "uncontrolled-propagation-accuracy", [
        (dev <= 1e-3,
         f"one-period deviation {dev:.3e} at order 4 (limit 1e-3)"),
        (worst_id <= 1e-10,
         f"zero-time flow identity error {worst_id:.3e} across models "
         "(limit 1e-10)"),
    ])
