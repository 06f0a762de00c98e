"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
summary.  Tolerances are pinned here, straight from the statements.
"""

import math
import random
import time

import mpmath
import numpy as np
import pytest

from qpseries.cancel import (DenominatorData, canonical_translation,
                             check_stack_bound, cont_class, equivalence_class,
                             sample_loop_stacks, translate_marked,
                             verify_consistency)
from qpseries.model import (FrequencyVector, OperatorInstance, PotentialSpec,
                            golden_frequency, laplacian_kernel, probe_regularity)
from qpseries.paths import (PathWeightContext, cont, enumerate_paths, make_path,
                            parse_path, print_path)
from qpseries.series import (compute_series_longrange, evaluate_partial_sum,
                             lambda_of_x)
from qpseries.spectra import (completeness_check, halving_report,
                              ids_counting_check)
from qpseries.flatseg import (f1_function, flat_window_sites,
                              min_difference_quotient, staged_from_instance,
                              step1, step2)
from qpseries._jacobi import jacobi_eigh


def _report(num, text):
    print(f"\n[PASS] criterion {num}: {text}")


# ---------------------------------------------------------------------------


def test_criterion_1_path_sum_vs_recursion(maryland):
    t0 = time.time()
    ctx = PathWeightContext(instance=maryland)
    rec = compute_series_longrange(maryland, 8)
    worst = 0.0
    for s in range(1, 9):
        total = sum(cont(p, ctx) for p in enumerate_paths(maryland, "eigenvalue", s))
        ref = rec.lambdas[s]
        err = abs(total - ref) / max(abs(ref), 1e-30) if ref != 0.0 else abs(total)
        worst = max(worst, err)
        assert err <= 1e-10, f"s={s}: rel err {err}"
    inst2 = OperatorInstance(PotentialSpec("maryland_tan"), golden_frequency(2),
                             0.13, 0.05, laplacian_kernel(2), n_check=20)
    ctx2 = PathWeightContext(instance=inst2)
    rec2 = compute_series_longrange(inst2, 5)
    worst2 = 0.0
    for s in range(1, 6):
        total = sum(cont(p, ctx2) for p in enumerate_paths(inst2, "eigenvalue", s))
        ref = rec2.lambdas[s]
        err = abs(total - ref) / max(abs(ref), 1e-30) if ref != 0.0 else abs(total)
        worst2 = max(worst2, err)
        assert err <= 1e-10
    dt = time.time() - t0
    assert dt <= 60.0
    _report(1, f"path sums match the recursion (d=1 s<=8 worst rel {worst:.1e}, "
               f"d=2 s<=5 worst {worst2:.1e}) in {dt:.1f} s")


def test_criterion_2_regrouping(engineered3):
    inst, data = engineered3
    ctx = PathWeightContext(instance=inst)
    worst = 0.0
    for s in range(1, 9):
        paths = list(enumerate_paths(inst, "eigenvalue", s))
        if not paths:
            continue
        ungrouped = math.fsum(cont(p, ctx) for p in paths)
        reps = {}
        for p in paths:
            reps.setdefault(print_path(canonical_translation(p, data)), p)
        # telescoped class evaluation: a genuinely different numeric route
        grouped = math.fsum(cont_class(p, ctx, data, method="telescope")
                            for p in reps.values())
        scale = max(abs(ungrouped), 1e-30)
        err = abs(grouped - ungrouped) / scale
        worst = max(worst, err)
        assert err <= 1e-10, f"s={s}"
    # high-precision mode at the top order
    hp = PathWeightContext(instance=inst, precision=60)
    paths = list(enumerate_paths(inst, "eigenvalue", 8))
    with mpmath.workdps(60):
        ungrouped = mpmath.fsum(cont(p, hp) for p in paths)
        reps = {}
        for p in paths:
            reps.setdefault(print_path(canonical_translation(p, data)), p)
        grouped = mpmath.fsum(cont_class(p, hp, data, method="telescope")
                              for p in reps.values())
        err_hp = float(abs(grouped - ungrouped) / abs(ungrouped))
    assert err_hp <= 1e-25
    _report(2, f"regrouping exact: worst double rel {worst:.1e}, "
               f"high-precision rel {err_hp:.1e}")


def test_criterion_3_remark_closed_form(engineered5):
    inst, data = engineered5
    assert data.level((5,)) == 1  # engineered level-1 denominator at site 5
    ctx = PathWeightContext(instance=inst)
    v0 = inst.v(0)
    base = cont(parse_path("(123454321)"), ctx)
    worst = 0.0
    for k in range(2, 9):
        p = make_path("eigenvalue", [1, 2, 3, 4] + [5, 4] * (k - 1) + [5, 4, 3, 2, 1])
        fac = ((1.0 / (v0 - inst.v(4)) - 1.0 / (v0 - inst.v(-1)))
               / (v0 - inst.v(5))) ** (k - 1)
        want = base * fac
        got = cont_class(p, ctx, data, method="sum")
        err = abs(got - want) / abs(want)
        worst = max(worst, err)
        assert err <= 1e-12, f"k={k}: rel err {err}"
        assert len(equivalence_class(p, data)) == 2 ** (k - 1)
    _report(3, f"P_k family matches the factorized formula for k=2..8 "
               f"(worst rel {worst:.1e})")


def test_criterion_4_worked_strings():
    t = translate_marked(parse_path("(123[456[5]654]321)"))
    assert print_path(t) == "(123(123(-1)321)321)"
    fq = FrequencyVector.fit((0.3334,), n_check=8)
    data = DenominatorData(beta=0.05, c_safe=1.0, frequency=fq)
    cls = equivalence_class(parse_path("(123[456[5]654]321)"), data)
    assert {print_path(m) for m in cls} == {
        "(1234565654321)", "(123(1232321)321)",
        "(123(123(-1)321)321)", "(123456(-1)654321)"}
    fq5 = FrequencyVector.fit((0.61,), n_check=6)
    data5 = DenominatorData(beta=0.15, c_safe=3.0, frequency=fq5)
    for k in (2, 5, 8):
        p = make_path("eigenvalue", [1, 2, 3, 4] + [5, 4] * (k - 1) + [5, 4, 3, 2, 1])
        assert len(equivalence_class(p, data5)) == 2 ** (k - 1)
    _report(4, "canonical translation and class membership match the worked strings")


def test_criterion_5_consistency_axioms(golden):
    data = DenominatorData(beta=0.12, c_safe=1.0, frequency=golden)
    rep = verify_consistency(data, 100, bisect=True)
    assert rep.passed
    assert rep.largest_beta is not None
    at_best = DenominatorData(beta=rep.largest_beta, c_safe=1.0, frequency=golden)
    assert verify_consistency(at_best, 100, bisect=False).passed
    big = DenominatorData(beta=0.5, c_safe=1.0, frequency=golden)
    bad = verify_consistency(big, 100, bisect=False)
    assert not bad.passed
    assert bad.c1_violations or bad.c2_violations
    _report(5, f"(c0)-(c2) hold exhaustively on |n| <= 100 at beta = {data.beta} "
               f"(bisected max {rep.largest_beta:.4f}); beta = 0.5 reports "
               f"{len(bad.c1_violations)}+{len(bad.c2_violations)} violations")


def test_criterion_6_series_vs_oracle(maryland):
    t0 = time.time()
    # C fitted on the calibration run (gap/eps^7 = 0.108) with 3x headroom
    c_fit = 0.33
    r1, r2, ratio = halving_report(maryland, 40, 0.05, 8, 6)
    assert r1.gap <= c_fit * 0.05**7
    assert 2**6 / 2 <= ratio <= 2**8 * 2
    assert r1.overlap >= 0.999
    dt = time.time() - t0
    assert dt <= 120.0
    _report(6, f"|dlambda| = {r1.gap:.2e} <= {c_fit} eps^7; halving ratio "
               f"{ratio:.0f} in [32, 512]; overlap {r1.overlap:.6f} ({dt:.1f} s)")


def test_criterion_7_localization_and_completeness(maryland):
    res = compute_series_longrange(maryland, 8)
    _, psi_cal = evaluate_partial_sum(res, 0.05, 8)
    # fit the envelope constant at eps = 0.05 ...
    c_env = 0.0
    for n, v in psi_cal.items():
        d = abs(n[0])
        if d >= 1 and v != 0.0:
            c_env = max(c_env, (abs(v) ** (1.0 / d)) / 0.05)
    assert math.isfinite(c_env) and c_env > 0
    # ... and re-verify at eps = 0.025 with a constant slack
    _, psi_chk = evaluate_partial_sum(res, 0.025, 8)
    slack = math.log(4.0)
    for n, v in psi_chk.items():
        d = abs(n[0])
        if d >= 1 and v != 0.0:
            assert math.log(abs(v)) <= d * math.log(c_env * 0.025) + slack
    rep1 = completeness_check(maryland, 0.05, 40, 6)
    c_fit = rep1.fitted_c
    rep2 = completeness_check(maryland, 0.025, 40, 6)
    assert rep1.dev_gram <= c_fit * 0.05 * (1 + 1e-12)
    assert max(rep2.dev_gram, rep2.dev_frame) <= 1.5 * c_fit * 0.025
    _report(7, f"envelope holds with fitted C = {c_env:.3f}; completeness "
               f"deviation {rep1.dev_gram:.2e} = {c_fit:.3f} eps, re-verified at "
               f"eps/2 within 1.5x")


def test_criterion_8_monotonicity_and_ids(maryland):
    xs = [-0.35 + 0.7 * k / 199 for k in range(200)]
    curve = lambda_of_x(maryland, 8, xs, epsilon=0.05, s_used=6)
    assert not curve.errors
    assert curve.strictly_increasing()
    rows = ids_counting_check(maryland, [-2.0, -0.5, 0.3, 1.0, 3.0], 40, 0.05, 8, 6)
    worst = max(r[3] for r in rows)
    assert worst <= 2.0 / 40
    _report(8, f"lambda(x) strictly increasing on 200 grid points "
               f"(min gap {curve.min_gap():.2e}); IDS counting off by "
               f"{worst:.4f} <= 2/N = {2.0 / 40}")


def test_criterion_9_flat_segment(flat_instance):
    inst = flat_instance.with_epsilon(0.02)
    h0 = staged_from_instance(inst, 30)
    h1 = step1(inst, 30)
    h2 = step2(h1)
    flats = flat_window_sites(h2)
    assert flats
    for s in flats:
        i = h1.index[s]
        assert np.max(np.abs(h1.phi[1][i, :])) == 0.0
        assert np.max(np.abs(h2.phi[2][i, :])) == 0.0
    a, h = 0.0, 0.012
    xs = [a - 0.9 * h + 1.8 * h * k / 200 for k in range(201)]
    q1 = min_difference_quotient(xs, f1_function(inst, xs))
    q2 = min_difference_quotient(xs, f1_function(inst.with_epsilon(0.01), xs))
    assert 3.0 <= q1 / q2 <= 5.0
    e0, _ = jacobi_eigh(h0.assemble())
    e2, _ = jacobi_eigh(h2.assemble())
    dev = float(np.max(np.abs(e0 - e2)))
    assert dev <= 1e-10
    _report(9, f"flat rows exactly zero; min f1 quotient ratio {q1 / q2:.2f} in "
               f"[3, 5]; spectra of H and H2 agree to {dev:.1e}")


def test_criterion_10_stack_bounds(engineered5, engineered3):
    worst_ratio = 0.0
    worst_lip = 0.0
    for inst, data in (engineered5, engineered3):
        ctx = PathWeightContext(instance=inst)
        reg = probe_regularity(inst.potential, inst.phase, 2000)
        d_min = max(reg.d_min, 1.0)
        stacks = sample_loop_stacks(inst, data, 200, max_base=14,
                                    rng=random.Random(2024))
        assert len(stacks) == 200
        cal, hold = stacks[:100], stacks[100:]
        c_fit = 1.0
        for s in cal:
            r = check_stack_bound(s, ctx, data, c_reg=reg.c_reg, d_min=d_min,
                                  c_dist=1.0)
            if r.ratio > 0:
                c_fit = max(c_fit, r.ratio ** (1.0 / r.length))
        c_dist = 1.05 * c_fit
        for s in hold:
            r = check_stack_bound(s, ctx, data, c_reg=reg.c_reg, d_min=d_min,
                                  c_dist=c_dist)
            worst_ratio = max(worst_ratio, r.ratio)
            worst_lip = max(worst_lip, r.lipschitz_ratio)
            assert r.lhs <= r.rhs
            assert r.lipschitz_fd <= 2.0 * r.lipschitz_bound
    _report(10, f"100+100 sampled stacks per config satisfy the bound "
                f"(worst holdout ratio {worst_ratio:.2e}) and the Lipschitz "
                f"form within 2x (worst {worst_lip:.2e})")
