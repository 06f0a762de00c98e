import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpseries.errors import NotOneToOne, ResonantSite, SingularArgument
from qpseries.model import (FrequencyVector, GOLDEN_MEAN, OperatorInstance,
                            PotentialSpec, frac_centered, golden_frequency,
                            hopping_value, kernel_from_orders, laplacian_kernel,
                            potential_value, probe_regularity, torus_norm, v_of)


# ---------------------------------------------------------------------------
# frequencies


def test_golden_frequency_canonical(golden):
    assert golden.omega == (GOLDEN_MEAN - 1.0,)
    assert golden.dio_margin > 0
    assert golden.dio_constant <= golden.dio_margin
    # ||5w|| for the golden mean via the Fibonacci convergent 3/5
    assert golden.torus_norm_at((5,)) == pytest.approx(abs(5 * GOLDEN_MEAN - 3), abs=1e-15)


def test_frequency_rejects_rational_dependence():
    with pytest.raises(ValueError, match="rational dependence"):
        FrequencyVector(omega=(0.5,), dio_constant=0.1, dio_exponent=2.5, n_check=10)


def test_frequency_rejects_small_tau():
    with pytest.raises(ValueError, match="dio_exponent"):
        FrequencyVector.fit((GOLDEN_MEAN,), dio_exponent=1.5)


def test_diophantine_verified_at_construction():
    fit = FrequencyVector.fit((GOLDEN_MEAN,), n_check=30)
    with pytest.raises(ValueError, match="Diophantine"):
        FrequencyVector(omega=(GOLDEN_MEAN,), dio_constant=fit.dio_margin * 10,
                        dio_exponent=fit.dio_exponent, n_check=30)


# ---------------------------------------------------------------------------
# potentials


def test_maryland_values():
    spec = PotentialSpec("maryland_tan")
    assert potential_value(spec, 0.0) == 0.0
    assert potential_value(spec, 0.25) == pytest.approx(1.0, abs=1e-15)


def test_singular_argument_near_pole():
    spec = PotentialSpec("maryland_tan")
    with pytest.raises(SingularArgument):
        potential_value(spec, 0.5 - 1e-12)


def test_flat_segment_flat_inside_inner_piece():
    spec = PotentialSpec("flat_segment", {"a": 0.0, "h": 0.02, "h1": 0.02 / 2})
    assert potential_value(spec, 0.005) == potential_value(spec, 0.0)
    assert potential_value(spec, 0.009) == potential_value(spec, -0.009)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.49, 0.49), st.integers(-3, 3))
def test_periodicity_exact(x, k):
    # only test shifts that are exactly representable
    if (x + k) - k != x:
        return
    spec = PotentialSpec("maryland_tan")
    try:
        a = potential_value(spec, x)
    except SingularArgument:
        return
    assert potential_value(spec, x + k) == a


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.45, 0.42), st.floats(0.001, 0.05))
def test_monotone_kinds_nondecreasing(x, dx):
    for kind, params in (("maryland_tan", {}), ("meromorphic_monotone_sample", {"c": 0.3}),
                         ("flat_segment", {"a": 0.0, "h": 0.02, "h1": 0.008})):
        spec = PotentialSpec(kind, params)
        assert potential_value(spec, x) <= potential_value(spec, x + dx) + 1e-12


# ---------------------------------------------------------------------------
# shifted potential


def test_v_of_constant_at_origin(maryland):
    assert v_of(maryland, 0, t=0.3) == v_of(maryland, 0, t=0.0)


def test_v_of_direct_evaluation(maryland):
    om = maryland.frequency.omega[0]
    want = math.tan(math.pi * frac_centered(0.1 + om))
    assert v_of(maryland, 1) == pytest.approx(want, rel=1e-14)


def test_v_of_shift_cancels_offset(maryland):
    om = maryland.frequency.omega[0]
    assert v_of(maryland, 1, t=-om) == pytest.approx(v_of(maryland, 0), rel=1e-12)


def test_nonresonance_probe_fires():
    with pytest.raises(ResonantSite):
        OperatorInstance(PotentialSpec("maryland_tan"), golden_frequency(), 0.1,
                         0.05, laplacian_kernel(1), delta_res=10.0)


# ---------------------------------------------------------------------------
# hopping kernels


def test_laplacian_values():
    k = laplacian_kernel(1)
    assert hopping_value(k, 1, (0,), (1,), 0.3) == 1.0
    assert hopping_value(k, 1, (0,), (2,), 0.3) == 0.0  # outside range, exact zero
    assert k.distance((5,)) == 5
    assert k.ball(2) == [(-2,), (-1,), (0,), (1,), (2,)]


def test_kernel_rejects_asymmetric_table():
    with pytest.raises(ValueError, match="symmetric"):
        kernel_from_orders(1, 1, {1: {(1,): 1.0}})


def test_kernel_rejects_zero_offset():
    with pytest.raises(ValueError, match="zero hopping offset"):
        kernel_from_orders(1, 1, {1: {(0,): 1.0, (1,): 1.0, (-1,): 1.0}})


def test_kernel_rejects_range_violation():
    with pytest.raises(ValueError, match="Range"):
        kernel_from_orders(1, 1, {1: {(2,): 1.0, (-2,): 1.0}})


def test_self_adjointness_value_identity():
    phi = lambda x: complex(math.cos(2 * math.pi * x), math.sin(2 * math.pi * x))
    phib = lambda x: complex(math.cos(2 * math.pi * x), -math.sin(2 * math.pi * x))
    k = kernel_from_orders(1, 1, {1: {(1,): phi, (-1,): phib}})
    om = (GOLDEN_MEAN,)
    for m, n in (((0,), (1,)), ((3,), (2,))):
        a = hopping_value(k, 1, m, n, 0.2, om)
        b = hopping_value(k, 1, n, m, 0.2, om)
        assert a == pytest.approx(b.conjugate(), abs=1e-14)


def test_xdep_covariance():
    phi = lambda x: math.sin(2 * math.pi * x) + 2.0
    k = kernel_from_orders(1, 1, {1: {(1,): phi, (-1,): phi}})
    assert not k.constant_flag
    om = (GOLDEN_MEAN,)
    for a in (1, -2, 3):
        for m, n in (((0,), (1,)), ((2,), (1,))):
            lhs = hopping_value(k, 1, (m[0] + a,), (n[0] + a,), 0.17, om)
            rhs = hopping_value(k, 1, m, n, 0.17 + a * om[0], om)
            assert lhs == pytest.approx(rhs, abs=1e-12)


def test_order_weighted_distance():
    k = kernel_from_orders(1, 1, {2: {(2,): 1.0, (-2,): 1.0}})
    assert k.distance((4,)) == 4  # two order-2 hops
    assert k.distance((2,)) == 2
    assert k.distance((1,)) == math.inf  # unreachable parity


# ---------------------------------------------------------------------------
# regularity probes


def test_regularity_maryland_center():
    rep = probe_regularity(PotentialSpec("maryland_tan"), 0.0, grid_size=4000)
    assert rep.passed
    assert rep.d_min == pytest.approx(math.pi, rel=1e-4)
    # f' = pi sec^2: max/min over the preimage of (-2, 2) is 1 + 2^2
    # (difference quotients average the derivative over cells, so slightly low)
    assert rep.c_cr1 == pytest.approx(5.0, rel=5e-3)
    assert rep.a == pytest.approx(-math.atan(2.0) / math.pi, abs=1e-6)


def test_regularity_linear_branch_constant_one():
    lin = PotentialSpec("piecewise_user",
                        {"func": lambda x: 10.0 * x, "singularities": (0.5,)})
    rep = probe_regularity(lin, 0.0, grid_size=2000)
    assert rep.c_cr1 == pytest.approx(1.0, abs=1e-9)
    assert rep.d_min == pytest.approx(10.0, rel=1e-9)


def test_regularity_flat_piece_fails_cr1():
    spec = PotentialSpec("flat_segment", {"a": 0.0, "h": 0.02, "h1": 0.008})
    rep = probe_regularity(spec, 0.0, grid_size=2000)
    assert not rep.passed
    assert rep.d_min == 0.0


def test_regularity_detects_fold_back():
    bad = PotentialSpec("piecewise_user",
                        {"func": lambda x: math.tan(math.pi * x) - 2.2 * math.sin(2 * math.pi * x),
                         "singularities": (0.5,)})
    with pytest.raises(NotOneToOne):
        probe_regularity(bad, 0.0, grid_size=2000)


def test_regularity_rescaled_variant():
    rep = probe_regularity(PotentialSpec("maryland_tan"), 0.0, grid_size=2000, nu=0.5)
    assert rep.passed
    assert rep.b == pytest.approx(math.atan(1.0) / math.pi, abs=1e-6)
