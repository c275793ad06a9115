import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from kreinspec import branch_tracker as bt
from kreinspec import toy_model as tm
from kreinspec.errors import (
    AmbiguityError,
    AmbiguousBracketError,
    InvalidInputError,
    StepRefinementError,
    WindowError,
)
from kreinspec.numkit import JordanType, conjugate_mismatch, dense_eigs, quartic_discriminant

import oracles

TRIPLE = tm.triple_root_params(1, 1)


def w_family(p):
    return tm.two_by_two_matrix(tm.TwoByTwoParams(0.0, 1.0, p))


def toy_t(z):
    return lambda t: tm.assemble_h4(tm.blowup_path(TRIPLE, t, z=z))


def toy_disc(z):
    return lambda t: quartic_discriminant(tm.char_coeffs(tm.blowup_path(TRIPLE, t, z=z)))


def sqrt_block(f, shift=0.0):
    # [[s, 1], [f(p), s]] has eigenvalues s +- sqrt(f(p)), real iff f >= 0
    return lambda p: np.array([[shift, 1.0], [f(p), shift]])


def block_diag(*fams):
    def fam(p):
        blocks = [f(p) for f in fams]
        n = sum(b.shape[0] for b in blocks)
        out = np.zeros((n, n))
        i = 0
        for b in blocks:
            k = b.shape[0]
            out[i:i + k, i:i + k] = b
            i += k
        return out
    return fam


class Counting:
    def __init__(self, fam):
        self.fam, self.calls = fam, 0

    def __call__(self, p):
        self.calls += 1
        return self.fam(p)


# --- sweep ---------------------------------------------------------------------------


def test_constant_family_flat_branches():
    A = np.array([[2.0, 1.0, 0.0], [0.0, -1.0, 3.0], [0.5, 0.0, 1.0]])
    branches = bt.sweep(lambda p: A, (0.0, 1.0), 11)
    assert len(branches) == 3
    for b in branches:
        assert np.all(b.values == b.values[0])
        assert np.all(np.diff(b.params) > 0) and len(b.samples) == 11


def test_sweep_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        bt.sweep(w_family, (1.0, 0.0), 10)
    with pytest.raises(InvalidInputError):
        bt.sweep(w_family, (0.0, 1.0), 1)
    with pytest.raises(InvalidInputError):
        bt.sweep(lambda p: np.eye(2 if p < 0.5 else 3), (0.0, 1.0), 5)


def test_two_by_two_branches_meet_at_cone():
    branches = bt.sweep(w_family, (0.0, 2.0), 201)
    assert len(branches) == 2
    w = branches[0].params
    expected = np.sqrt((1 - w**2).astype(complex))
    lo = np.minimum(branches[0].values.real, branches[1].values.real)
    assert np.allclose(lo[w < 1], -expected.real[w < 1], atol=1e-12)
    assert np.array_equal(branches[0].reality_flags, w <= 1 + 1e-12)


def test_toy_sweep_real_segment_structure():
    # at z=1: all real below the left EP, one conjugate pair up to the right EP, then two
    branches = bt.sweep(toy_t(1.0), (-0.2, 0.2), 401)
    assert len(branches) == 4
    t = branches[0].params
    real_count = np.column_stack([b.reality_flags for b in branches]).sum(axis=1)
    assert np.all(real_count[t < -0.131] == 4)
    assert np.all(real_count[(t > -0.130) & (t < 0.184)] == 2)
    assert np.all(real_count[t > 0.185] == 0)


def test_jump_raises_refinement_error():
    fam = lambda p: np.diag([p + 10.0 * (p > 0.503), 5.0])  # noqa: E731
    with pytest.raises(StepRefinementError):
        bt.sweep(fam, (0.0, 1.0), 11)


def test_sqrt_motion_near_ep_is_accepted():
    # the largest step motion at an EP is far above the median, yet contracts under halving
    branches = bt.sweep(w_family, (0.0, 1.5), 31)
    assert len(branches) == 2


def test_greedy_matches_optimal_assignment():
    fam = toy_t(0.99)
    exact = bt.sweep(fam, (-0.2, 0.2), 201)
    greedy = bt.sweep(fam, (-0.2, 0.2), 201, bt.TrackerSettings(exact_assignment_max=0))
    for a, b in zip(exact, greedy):
        assert np.array_equal(a.values, b.values)


def test_threaded_sweep_is_identical():
    fam = toy_t(0.99)
    a = bt.sweep(fam, (-0.2, 0.2), 101)
    b = bt.sweep(fam, (-0.2, 0.2), 101, bt.TrackerSettings(workers=4))
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


def test_keep_and_select():
    fam = lambda p: np.diag([1.0, 2.0, 3.0, 4.0]) + p * np.eye(4)  # noqa: E731
    right = bt.sweep(fam, (0.0, 1.0), 5, bt.TrackerSettings(keep=2, select="rightmost"))
    low = bt.sweep(fam, (0.0, 1.0), 5, bt.TrackerSettings(keep=2, select="lowest"))
    assert [b.values[0].real for b in right] == [3.0, 4.0]
    assert [b.values[0].real for b in low] == [1.0, 2.0]
    with pytest.raises(InvalidInputError):
        bt.sweep(fam, (0.0, 1.0), 5, bt.TrackerSettings(keep=2, select="middle"))


def test_sweep_is_deterministic():
    a = bt.sweep(toy_t(0.99), (-0.2, 0.2), 101)
    b = bt.sweep(toy_t(0.99), (-0.2, 0.2), 101)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


def partition(branches, reverse=False):
    rows = [b.values[::-1] if reverse else b.values for b in branches]
    return sorted(tuple(np.round(np.column_stack([r.real, r.imag]), 9).ravel().tolist()) for r in rows)


def partition_close(a, b):
    return len(a) == len(b) and all(np.allclose(x, y, atol=1e-8) for x, y in zip(a, b))


symmetric = st.lists(st.floats(-2, 2), min_size=9, max_size=9).map(lambda v: np.array(v).reshape(3, 3))


@given(symmetric, symmetric)
def test_reversal_gives_same_partition_hermitian(A, B):
    A, B = A + A.T, B + B.T
    fwd = bt.sweep(lambda p: A + p * B, (0.0, 1.0), 41)
    rev = bt.sweep(lambda p: A - p * B, (-1.0, 0.0), 41)
    assert partition_close(partition(fwd), partition(rev, reverse=True))


@pytest.mark.parametrize("z", [0.95, 0.99, 1.01])
def test_reversal_gives_same_partition_toy(z):
    fam = toy_t(z)
    fwd = bt.sweep(fam, (-0.2, 0.2), 401)
    rev = bt.sweep(lambda t: fam(-t), (-0.2, 0.2), 401)
    assert partition_close(partition(fwd), partition(rev, reverse=True))


@given(st.lists(st.floats(-2, 2), min_size=32, max_size=32))
@hsettings(max_examples=30)
def test_branches_closed_under_conjugation(v):
    A = np.array(v[:16]).reshape(4, 4)
    B = np.array(v[16:]).reshape(4, 4)
    branches = bt.sweep(lambda p: A + p * B, (0.0, 1.0), 21)
    vals = np.column_stack([b.values for b in branches])
    scale = 1 + np.abs(vals).max()
    for row in vals:
        assert conjugate_mismatch(row) <= 1e-8 * scale


# --- find_eps ------------------------------------------------------------------------


def test_no_flips_no_eps():
    A = np.diag([1.0, 2.0, 3.0])
    fam = lambda p: A + p * np.eye(3)  # noqa: E731
    assert bt.find_eps(bt.sweep(fam, (0.0, 1.0), 11), fam) == []
    assert bt.find_eps([], fam) == []


def test_two_by_two_ep_on_cone():
    eps = bt.find_eps(bt.sweep(w_family, (0.0, 2.0), 21), w_family, precision=1e-12)
    assert len(eps) == 1
    ep = eps[0]
    assert abs(ep.parameter - 1.0) < 1e-10 and abs(ep.eigenvalue) < 1e-5
    assert ep.order == 2 and ep.branch_ids == (0, 1) and ep.transition == "real->complex"
    assert ep.width <= 1e-12
    assert ep.jordan_type is JordanType.DOUBLE_DEFECTIVE


def test_ep_gap_residual_scales_with_precision():
    for prec in (1e-6, 1e-10):
        ep = bt.find_eps(bt.sweep(w_family, (0.0, 2.0), 21), w_family, precision=prec)[0]
        # square-root branching: gap ~ 2 sqrt(2 |w - 1|)
        assert ep.width <= prec and ep.gap <= 4 * math.sqrt(prec)


def test_eigenvector_overlap_grows_toward_ep():
    ep = bt.find_eps(bt.sweep(w_family, (0.0, 2.0), 21), w_family, precision=1e-12)[0]

    def overlap(d):
        _, V = np.linalg.eig(w_family(ep.parameter - d))
        V = V / np.linalg.norm(V, axis=0)
        return abs(np.vdot(V[:, 0], V[:, 1]))

    ov = [overlap(d) for d in (1e-2, 1e-4, 1e-6)]
    assert ov[0] < ov[1] < ov[2] and ov[2] > 0.999


def test_bisection_iteration_bound():
    steps, prec = 21, 1e-10
    branches = bt.sweep(w_family, (0.0, 2.0), steps)
    fam = Counting(w_family)
    eps = bt.find_eps(branches, fam, precision=prec, classify=False)
    h = 2.0 / (steps - 1)
    assert len(eps) == 1 and fam.calls <= math.ceil(math.log2(h / prec)) + 2


@pytest.mark.parametrize("z", [0.95, 0.99, 1.0, 1.01])
def test_toy_eps_match_discriminant_roots(z):
    fam = toy_t(z)
    eps = bt.find_eps(bt.sweep(fam, (-0.2, 0.2), 801), fam, precision=1e-12, classify=False)
    roots = oracles.sign_change_roots(toy_disc(z), np.linspace(-0.2, 0.2, 4001))
    if z == 1.0:
        # the triple root at t=0 is a double zero of the discriminant but not an EP2
        roots = [r for r in roots if abs(r) > 1e-6]
    assert len(eps) == len(roots) >= 2
    for ep, r in zip(eps, sorted(roots)):
        assert abs(ep.parameter - r) < 1e-6


def test_toy_eps_bracket_real_segment():
    # fixed z just below the triple point: two nearby EPs bracket a real segment
    fam = toy_t(0.99)
    branches = bt.sweep(fam, (-0.05, 0.05), 401)
    eps = bt.find_eps(branches, fam)
    near = [e for e in eps if abs(e.parameter) < 0.05]
    assert len(near) == 2
    a, b = near
    mid = 0.5 * (a.parameter + b.parameter)
    assert np.all(bt.TrackerSettings().is_real(dense_eigs(fam(mid))))
    assert {a.transition, b.transition} == {"real->complex", "complex->real"}


def test_ambiguous_bracket():
    f = lambda p: -(p - 0.2) * (p - 0.3) * (p - 0.6)  # noqa: E731
    fam = sqrt_block(f)
    with pytest.raises(AmbiguousBracketError):
        bt.find_eps(bt.sweep(fam, (0.0, 1.0), 2), fam)
    # a fine grid resolves all three flips
    eps = bt.find_eps(bt.sweep(fam, (0.0, 1.0), 101), fam)
    assert [round(e.parameter, 8) for e in eps] == [0.2, 0.3, 0.6]


def test_ep_to_dict():
    ep = bt.find_eps(bt.sweep(w_family, (0.0, 2.0), 21), w_family)[0]
    d = ep.to_dict()
    assert d["order"] == 2 and d["jordan_type"] == "double-defective" and set(d["residuals"]) == {"gap", "bisection_width"}


# --- exponent check ------------------------------------------------------------------


def test_exponent_square_root_closed_form():
    ep = bt.find_eps(bt.sweep(w_family, (0.0, 2.0), 21), w_family, precision=1e-13)[0]
    fit = bt.ep_exponent_check(ep, w_family)
    assert abs(fit.exponent - 0.5) < 1e-3 and fit.is_square_root and fit.n_points == 16


def test_exponent_toy_path():
    fam = toy_t(1.0)
    eps = bt.find_eps(bt.sweep(fam, (-0.2, 0.2), 401), fam, precision=1e-12)
    for ep in eps:
        fit = bt.ep_exponent_check(ep, fam, neighbors=eps)
        assert 0.4 <= fit.exponent <= 0.6


def test_exponent_diabolic_crossing():
    fam = lambda p: np.diag([p, -p])  # noqa: E731
    ep = bt.ExceptionalPoint(parameter=0.0, eigenvalue=0.0, branch_ids=(0, 1), width=1e-12)
    fit = bt.ep_exponent_check(ep, fam)
    assert abs(fit.exponent - 1.0) < 1e-6 and not fit.is_square_root


def test_exponent_window_errors():
    ep = bt.ExceptionalPoint(parameter=1.0, eigenvalue=0.0, branch_ids=(0, 1), width=1e-4)
    with pytest.raises(WindowError):
        bt.ep_exponent_check(ep, w_family)
    ep.width = 1e-13
    with pytest.raises(WindowError):
        bt.ep_exponent_check(ep, w_family, window=(1e-3, 1e-4))
    with pytest.raises(WindowError):
        bt.ep_exponent_check(ep, w_family, points=1)


# --- triple point --------------------------------------------------------------------


def toy2_z_primary(z, t):
    return tm.assemble_h4(tm.blowup_path(TRIPLE, t, z=z))


def toy2_t_primary(t, z):
    return tm.assemble_h4(tm.blowup_path(TRIPLE, t, z=z))


def test_cluster_discriminant():
    assert bt.cluster_discriminant(np.array([1.0, 2.0, 4.0])) == pytest.approx((1 * 3 * 2) ** 2)
    assert bt.cluster_discriminant(np.array([1.0, 1j, -1j])) < 0


def test_triple_point_secondary_t():
    c = bt.find_triple_point(toy2_z_primary, (0.9, 1.05), (-0.05, 0.05), precision=1e-8)
    assert c.coalesced
    assert abs(c.secondary_parameter) < 1e-6 and abs(c.primary_parameter - 1.0) < 1e-4
    assert abs(c.eigenvalue - 1.0) < 1e-3
    assert c.jordan_type is JordanType.I and c.report.rank_filtration == [3, 2, 1]
    seps = [s for _, s in c.ep_separation_history]
    assert all(b <= a for a, b in zip(seps, seps[1:]))


def test_triple_point_secondary_z():
    c = bt.find_triple_point(toy2_t_primary, (-0.1, 0.1), (0.99, 1.01), precision=1e-8)
    assert c.coalesced and abs(c.secondary_parameter - 1.0) < 1e-6
    assert abs(c.primary_parameter) < 1e-3 and c.jordan_type is JordanType.I
    assert c.to_dict()["jordan_type"] == "I"


def decoupled(second_ep):
    b1 = sqrt_block(lambda p: (p - 0.2) * (p - 0.3))
    b2 = sqrt_block(lambda p: (p - 0.6) * (p - second_ep), shift=10.0)
    fam = block_diag(b1, b2)
    return lambda p, s: fam(p)


def test_persistent_eps_do_not_coalesce():
    c = bt.find_triple_point(decoupled(0.75), (0.0, 1.0), (0.0, 1.0))
    assert not c.coalesced and c.secondary_parameter == 1.0 and c.jordan_type is None
    seps = [s for _, s in c.ep_separation_history]
    assert len(seps) >= 2 and np.allclose(seps, 0.1)


def test_equal_separations_are_ambiguous():
    with pytest.raises(AmbiguityError):
        bt.find_triple_point(decoupled(0.7), (0.0, 1.0), (0.0, 1.0))


def test_triple_point_needs_two_eps():
    fam2 = lambda p, s: w_family(p)  # noqa: E731
    with pytest.raises(InvalidInputError):
        bt.find_triple_point(fam2, (0.0, 2.0), (0.0, 1.0))
