"""Acceptance criteria, one test per criterion.

Each test records a ``C<n> PASS|FAIL ...`` line that is printed in the
terminal summary, then asserts. Criteria that cannot hold as stated are
still evaluated at the stated tolerance and fail.
"""
import math
import time

import numpy as np
import pytest

from diamond_gdof.bounds import logdet_identity_check, tsqmf_rate_bound
from diamond_gdof.cli import db_to_linear, sweep_slope
from diamond_gdof.core import LinkStrengths, McConfig, NetworkParams, exp_integral_e1, make_rng
from diamond_gdof.gdof import (gdof_network, gdof_nontrivial, gdof_relay_selection,
                               gdof_simple_bound, gdof_training)
from diamond_gdof.mclab import (lemma11_slope, make_ghat, mc_exp_reciprocal, mc_jensen_chisq,
                                mc_jensen_exponential, mc_theorem7_components)
from diamond_gdof.optim import (case_split, grad_f2_bound_check, grid_lipschitz_cell_bound,
                                p4_objective, reduce_to_two_points, solve_p1_closed,
                                solve_p1_grid, solve_p4_lp)
from diamond_gdof.regime import CANONICAL_TABLE, SWAPPED_TABLE, classify, permutation_index

MC_SAMPLES = 10 ** 6
SEED = 0
TABLE_V = [(3, (4, 1, 2, 3)), (4, (5, 1, 1, 3)), (5, (5, 2, 1, 3))]


def _record(log, n, ok, detail):
    log.append(f"C{n} {'PASS' if ok else 'FAIL'}  {detail}")


def test_c1_worked_example(acceptance_log):
    t0 = time.perf_counter()
    p = NetworkParams(3, 4, 1, 2, 3)
    T = p.T
    g1, g2 = gdof_training(p)
    rs = gdof_relay_selection(p)[0]
    relay2 = (T - 1) * min(p.gamma_sr2, p.gamma_rd2) / T
    closed = T * gdof_network(p).gdof
    grid = solve_p1_grid(p, 1001).value
    elapsed = time.perf_counter() - t0
    checks = {
        "simple_bound": gdof_simple_bound(p) == 2.0,
        "relay1": rs == 4 / 3,
        "relay2": relay2 == 2 / 3,
        "train1": T * g1 == 4.0,
        "train2": T * g2 == 3.0,
        "closed": abs(closed - 14 / 3) <= 1e-2,
        "grid": abs(grid - 14 / 3) <= 1e-2,
        "ordering": closed > T * g1 > T * g2,
        "runtime": elapsed < 1.0,
    }
    ok = all(checks.values())
    _record(acceptance_log, 1, ok,
            f"Txgdof closed={closed:.6f} grid={grid:.6f} (reference figure 5.33); "
            f"train 4,3; {elapsed:.3f}s")
    assert ok, checks


def _random_nontrivial(rng):
    while True:
        sr1, sr2, rd1, rd2 = rng.uniform(0.0, 5.0, 4)
        if sr1 >= sr2 and sr1 >= rd1 and rd2 >= rd1 and rd2 >= sr2:
            return NetworkParams(int(rng.integers(2, 11)), sr1, sr2, rd1, rd2)


def test_c2_closed_vs_grid(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures, worst = 0, 0.0
    for _ in range(200):
        p = _random_nontrivial(rng)
        diff = abs(solve_p1_closed(p).value - solve_p1_grid(p, 1001).value)
        tol = 3 * grid_lipschitz_cell_bound(p, 1001)
        failures += diff > tol
        worst = max(worst, diff / tol)
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 30
    _record(acceptance_log, 2, ok,
            f"200 instances, failures={failures}, worst diff/tol={worst:.3f}, {elapsed:.1f}s")
    assert ok


def test_c3_regime_exhaustive(acceptance_log):
    import itertools
    mismatches = 0
    for perm in itertools.permutations((1, 2, 3, 4)):
        g = [0.0] * 4
        for rank, label in enumerate(perm):
            g[label - 1] = float(4 - rank)
        r = classify(NetworkParams.from_gammas(3, g))
        table = SWAPPED_TABLE if r.swapped else CANONICAL_TABLE
        mismatches += permutation_index(perm) not in table[r.kind]
    spread = 0.0
    for T in (2, 3, 7):
        p = NetworkParams(T, 1, 1, 1, 1)
        vals = [gdof_simple_bound(p), gdof_relay_selection(p)[0], gdof_network(p).gdof,
                gdof_nontrivial(p)[0]]
        spread = max(spread, max(vals) - min(vals))
    ok = mismatches == 0 and spread <= 1e-9
    _record(acceptance_log, 3, ok,
            f"24 orderings, table mismatches={mismatches}; full-tie spread={spread:.1e}")
    assert ok


def test_c4_lp_pipeline(acceptance_log):
    # exponents log10(rho0^2) with rho0^2 in [2, 16] at the sweep base snr = 10
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    snrs = [10.0, 10 ** 1.5, 100.0, 10 ** 2.5, 1000.0]
    max_support, max_drop, max_var, max_rel = 0, -np.inf, 0.0, 0.0
    n = 0
    while n < 20:
        gam = tuple(np.log10(rng.uniform(2.0, 16.0, 4)))
        sr1, sr2, rd1, rd2 = gam
        if not (sr1 >= sr2 and sr1 >= rd1 and rd2 >= rd1 and rd2 >= sr2):
            continue
        T = int(rng.integers(2, 5))
        drops, vals = [], []
        for s in snrs:
            rho = NetworkParams.from_gammas(T, gam, s).link_strengths()
            dist, v = solve_p4_lp(rho, T, 0.5, 2.0 * T)
            red = reduce_to_two_points(case_split(dist, rho), rho, T)
            max_support = max(max_support, dist.support_size)
            drops.append(v - p4_objective(red, rho, T))
            vals.append(v)
        slope = (vals[-1] - vals[2]) / (math.log2(snrs[-1]) - math.log2(snrs[2]))
        closed = solve_p1_closed(NetworkParams.from_gammas(T, gam)).value
        max_rel = max(max_rel, abs(slope / closed - 1.0))
        max_drop = max(max_drop, max(drops))
        max_var = max(max_var, float(np.ptp(drops)))
        n += 1
    elapsed = time.perf_counter() - t0
    ok = max_support <= 3 and max_drop <= 10 and max_var <= 2 and max_rel <= 0.10 \
        and elapsed < 120
    _record(acceptance_log, 4, ok,
            f"20 instances: support<={max_support}, drop<={max_drop:.3f} bits, "
            f"variation<={max_var:.3f} bits, top-decade slope rel err<={max_rel:.3f}, "
            f"{elapsed:.1f}s")
    assert ok


def test_c5_tsqmf_slopes(acceptance_log):
    t0 = time.perf_counter()
    dbs = [60, 70, 80, 90, 100, 110, 120]
    slope_ok, narrative_ok, notes = True, True, []
    for T, gam in TABLE_V:
        p = NetworkParams.from_gammas(T, gam)
        res = sweep_slope(p, dbs, "tsqmf")
        slope_ok &= res.rel_error <= 0.02
        top = p.with_snr(db_to_linear(dbs[-1]))
        sol = solve_p1_closed(top)
        rep = tsqmf_rate_bound(top, sol.p_lambda, sol.c_r12_sq)
        # nonconcurrent means the relay-1 cross branch reaches the destination at O(1) power
        cross = sol.c_r12_sq * top.link_strengths().rho_rd1_sq
        if sol.subregime in ("1", "2.1"):
            good = cross <= 1.0 + 1e-9
        else:
            good = {"parallel", "miso"} <= set(rep.active) and 0 < sol.c_r12_sq <= 1.0
        narrative_ok &= good
        notes.append(f"case {sol.subregime}: rel_err={res.rel_error:.4f} "
                     f"c^2*rho_rd1^2={cross:.3g} active={'+'.join(rep.active)}"
                     f"{'' if good else ' (narrative mismatch)'}")
    # the c = 0 reading in case 2.1 does not reach the gDoF
    p21 = NetworkParams(4, 5, 1, 1, 3, snr=db_to_linear(120))
    s21 = solve_p1_closed(p21)
    r0 = tsqmf_rate_bound(p21, s21.p_lambda, 0.0)
    zero_gap = 1.0 - r0.rate_per_symbol / p21.log2_snr() / gdof_network(p21).gdof
    elapsed = time.perf_counter() - t0
    ok = slope_ok and narrative_ok and elapsed < 10
    _record(acceptance_log, 5, ok,
            f"slopes {'ok' if slope_ok else 'FAIL'}; narrative "
            f"{'ok' if narrative_ok else 'FAIL'}; " + "; ".join(notes)
            + f"; case 2.1 with c=0 falls {zero_gap:.1%} short; {elapsed:.2f}s")
    assert ok


def _ghat_violations(rho_sq, seed):
    rng = make_rng(seed, 99)
    s = math.sqrt((rho_sq + 1.0) / 2.0)
    z = s * (rng.standard_normal(MC_SAMPLES) + 1j * rng.standard_normal(MC_SAMPLES))
    g2 = np.abs(make_ghat(z)) ** 2
    base = 1.0 + np.abs(z) ** 2
    return int(np.count_nonzero((g2 < base * (1 - 1e-12)) | (g2 > 2 * base * (1 + 1e-12))))


def _lemma_suite(workers):
    mc = McConfig(samples=MC_SAMPLES, seed=SEED, workers=workers)
    reps = []
    for a, b, mu in ((0.0, 1.0, 1.0), (10.0, 1.0, 1.0), (1.0, 2.0, 5.0)):
        reps.append(mc_jensen_exponential(a, b, mu, mc))
    for a, b, dof in ((0.0, 1.0, 6), (1.0, 1.0, 2), (0.0, 1.0, 100)):
        reps.append(mc_jensen_chisq(a, b, dof, mc))
    for b, mu in ((1.0, 1.0), (100.0, 1.0), (0.01, 1.0)):
        reps.append(mc_exp_reciprocal(b, mu, mc))
    l11 = lemma11_slope([1e2, 1e3, 1e4], mc)
    reps.extend(l11["reports"])
    return reps, l11


@pytest.fixture(scope="module")
def lemma_runs():
    t0 = time.perf_counter()
    out = _lemma_suite(workers=1)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def theorem7_run():
    return mc_theorem7_components([1e2, 1e4, 1e6], 3,
                                  McConfig(samples=MC_SAMPLES, seed=SEED, workers=1))


def test_c6_lemma_suite(acceptance_log, lemma_runs):
    (reps, l11), mc_time = lemma_runs
    t0 = time.perf_counter()
    grads = [grad_f2_bound_check(LinkStrengths(1.0, 1.0, r1, r2), T, 1000, seed=SEED)
             for r1, r2, T in ((4.0, 8.0, 3), (1.0, 2.0, 2), (16.0, 64.0, 5))]
    logdet = [logdet_identity_check(M, T, seed=SEED) for M, T in ((1, 3), (2, 4), (3, 6))]
    ghat = [_ghat_violations(r, SEED) for r in (1.0, 1e2, 1e4)]
    elapsed = mc_time + time.perf_counter() - t0
    anchor = abs(exp_integral_e1(1.0) - 0.219384) <= 1e-6
    failed = [f"{r.lemma_id}({r.extra.get('rho_sq', '')})" for r in reps if not r.passed]
    slope_ok = abs(l11["slope"] + 1.0) <= 0.05
    sandwiches_ok = (not failed and anchor and all(g.passed for g in grads)
                     and all(logdet) and not any(ghat))
    ok = sandwiches_ok and slope_ok and elapsed < 300
    _record(acceptance_log, 6, ok,
            f"sandwiches {'ok' if sandwiches_ok else 'FAIL ' + ','.join(failed)}"
            f" ({len(reps)} MC reports, E1(1)={exp_integral_e1(1.0):.7f}, grad/logdet/ghat ok="
            f"{all(g.passed for g in grads) and all(logdet) and not any(ghat)}); "
            f"correlated-noise slope={l11['slope']:.4f} (target -1 +/- 0.05); {elapsed:.1f}s")
    assert sandwiches_ok
    assert slope_ok, f"correlated-noise fitted slope {l11['slope']:.4f}"


def test_c7_theorem7(acceptance_log, theorem7_run):
    rep = theorem7_run
    gaps = [min(pt["gaps"].values()) for pt in rep.extra["points"]]
    gaps_ok = rep.checks["gaps_nonnegative"]
    slope_ok = rep.in_bounds
    ok = gaps_ok and slope_ok
    _record(acceptance_log, 7, ok,
            f"assembly slope={rep.estimate:.4f} (target -1 +/- 0.05); "
            f"min gaps per rho^2={[round(g, 4) for g in gaps]} "
            f"({'nonnegative within 3 SE' if gaps_ok else 'NEGATIVE'})")
    assert gaps_ok
    assert slope_ok, f"assembly slope {rep.estimate:.4f}"


def test_c8_determinism(acceptance_log, lemma_runs, theorem7_run):
    (reps1, l11_1), _ = lemma_runs
    reps4, l11_4 = _lemma_suite(workers=4)
    same = all(a.estimate == b.estimate and a.se == b.se for a, b in zip(reps1, reps4))
    same &= l11_1["slope"] == l11_4["slope"]
    t4 = mc_theorem7_components([1e2, 1e4, 1e6], 3,
                                McConfig(samples=MC_SAMPLES, seed=SEED, workers=4))
    same &= t4.estimate == theorem7_run.estimate
    same &= all(a["gaps"] == b["gaps"] for a, b in zip(t4.extra["points"],
                                                       theorem7_run.extra["points"]))
    same &= _ghat_violations(1e2, SEED) == _ghat_violations(1e2, SEED)
    _record(acceptance_log, 8, same,
            f"workers=1 vs workers=4 bit-identical over {len(reps1)} lemma reports "
            "and the train-scale components")
    assert same
