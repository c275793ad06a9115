import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec import dynamo as dy
from kreinspec import branch_tracker as bt
from kreinspec.errors import ConfigError, DomainError
from kreinspec.numkit import conjugate_mismatch

import oracles


def const_cfg(alpha0, l=1, N=400, bc="idealized"):
    return dy.DynamoConfig(l=l, N=N, bc_kind=bc, profile=dy.AlphaProfile(constant=alpha0))


def oracle_rightmost(alpha0, l, count):
    kappa = oracles.spherical_zeros(l, 2 * count + 4)
    lam = np.concatenate([-kappa**2 + alpha0 * kappa, -kappa**2 - alpha0 * kappa])
    return np.sort(lam)[::-1][:count]


# --- alpha profile ---------------------------------------------------------------


def test_alpha_examples():
    assert dy.alpha_eval(dy.AlphaProfile(), 0.0) == pytest.approx(-21.465)
    assert dy.alpha_eval(dy.AlphaProfile(C=0.0), 0.37) == 0.0
    assert dy.alpha_eval(dy.AlphaProfile(), 1.0) == pytest.approx(-9.506, abs=1e-12)


@given(st.floats(-5, 5), st.floats(-2, 2))
def test_alpha_value_at_origin(C, zeta):
    assert dy.alpha_eval(dy.AlphaProfile(C=C, zeta=zeta), 0.0) == pytest.approx(C * -(21.465 + 2.467 * zeta), abs=1e-12)


@given(st.floats(-5, 5), st.floats(-2, 2), st.floats(0.0, 0.4))
def test_alpha_is_quartic(C, zeta, r0):
    prof = dy.AlphaProfile(C=C, zeta=zeta)
    r = r0 + 0.1 * np.arange(6)
    # fifth difference of a quartic vanishes
    assert abs(np.diff(dy.alpha_eval(prof, r), 5)[0]) < 1e-9 * max(1.0, abs(C)) * 1e3


def test_alpha_matches_displayed_polynomial():
    C, z, r = 1.7, 0.3, 0.62
    ref = C * (-(21.465 + 2.467 * z) + (426.412 + 167.928 * z) * r**2 - (806.729 + 436.289 * z) * r**3
               + (392.276 + 272.991 * z) * r**4)
    assert dy.alpha_eval(dy.AlphaProfile(C=C, zeta=z), r) == pytest.approx(ref, rel=1e-14)


def test_alpha_domain():
    with pytest.raises(DomainError):
        dy.alpha_eval(dy.AlphaProfile(), 1.01)
    with pytest.raises(DomainError):
        dy.alpha_eval(dy.AlphaProfile(), -0.1)


def test_config_validation():
    with pytest.raises(ConfigError):
        dy.DynamoConfig(N=8)
    with pytest.raises(ConfigError):
        dy.DynamoConfig(l=0)
    with pytest.raises(ValueError):
        dy.DynamoConfig(bc_kind="periodic")


# --- assembly ------------------------------------------------------------------------


@pytest.mark.parametrize("bc", ["idealized", "realistic"])
def test_block_layout(bc):
    cfg = dy.DynamoConfig(N=40, bc_kind=bc)
    op = dy.assemble_dynamo(cfg)
    n1, n2 = op.blocks
    assert n2 == 39 and n1 == (40 if bc == "realistic" else 39)
    assert op.matrix.shape == (n1 + n2, n1 + n2) and op.grid.size == n1 + n2
    # -Q[1] on both diagonal blocks share the Dirichlet part
    assert np.array_equal(op.matrix[:n2, :n2], op.matrix[n1:n1 + n2, n1:n1 + n2])
    # upper-right block is alpha on the diagonal
    coupling = op.matrix[:n1, n1:]
    assert np.allclose(np.diag(coupling[:n2]), cfg.profile(op.grid[n1:]))
    off = coupling.copy()
    off[np.arange(n2), np.arange(n2)] = 0.0
    assert not off.any()
    assert "u(0)=0" in op.meta


def test_constant_alpha_gives_scaled_q():
    Qa, _ = dy.q_operator(lambda r: 2.5 * np.ones_like(np.asarray(r, dtype=float)), 2, 50)
    Q1, _ = dy.q_operator(lambda r: np.ones_like(np.asarray(r, dtype=float)), 2, 50)
    assert np.allclose(Qa, 2.5 * Q1, rtol=0, atol=1e-9)


@pytest.mark.parametrize("alpha0", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("l", [1, 2])
def test_constant_alpha_oracle(alpha0, l):
    ev = dy.dynamo_spectrum(const_cfg(alpha0, l))[:10]
    ref = oracle_rightmost(alpha0, l, 10)
    assert np.max(np.abs(ev - ref) / np.abs(ref)) < 1e-3


def test_leading_pair_example():
    ev = dy.dynamo_spectrum(const_cfg(1.0))
    k1 = 4.493409457909064
    assert abs(ev[0] - (-k1**2 + k1)) / abs(-k1**2 + k1) < 1e-3
    assert any(abs(e - (-k1**2 - k1)) / (k1**2 + k1) < 1e-3 for e in ev[:6])


def test_free_decay_double_multiplicity():
    ev = dy.dynamo_spectrum(const_cfg(0.0, N=200))[:6]
    k = oracles.spherical_zeros(1, 3)
    assert np.allclose(ev.real, np.repeat(-k**2, 2), rtol=1e-3)
    assert np.allclose(ev[0::2], ev[1::2], atol=1e-9)


def test_realistic_free_decay():
    # alpha = 0: poloidal vacuum matching gives j_{l-1} zeros, toroidal Dirichlet gives j_l zeros
    ev = dy.dynamo_spectrum(const_cfg(0.0, N=400, bc="realistic"))
    pol = -oracles.spherical_zeros(0, 3) ** 2
    tor = -oracles.spherical_zeros(1, 3) ** 2
    ref = np.sort(np.concatenate([pol, tor]))[::-1]
    assert np.allclose(ev[:6].real, ref, rtol=1e-4)


def test_convergence_order():
    ref = oracle_rightmost(1.0, 1, 1)[0]
    e1 = abs(dy.dynamo_spectrum(const_cfg(1.0, N=100))[0] - ref)
    e2 = abs(dy.dynamo_spectrum(const_cfg(1.0, N=200))[0] - ref)
    assert 1.7 <= math.log2(e1 / e2) <= 2.3


@pytest.mark.parametrize("bc", ["idealized", "realistic"])
@pytest.mark.parametrize("zeta", [-1.0, 0.0, 0.8])
def test_conjugation_symmetry(bc, zeta):
    op = dy.assemble_dynamo(dy.DynamoConfig(N=60, bc_kind=bc, profile=dy.AlphaProfile(zeta=zeta)))
    ev = dy.dynamo_spectrum(dy.DynamoConfig(N=60, bc_kind=bc, profile=dy.AlphaProfile(zeta=zeta)))
    assert conjugate_mismatch(ev) <= 1e-8 * np.linalg.norm(op.matrix, 2)


def test_spectrum_sorted_descending():
    ev = dy.dynamo_spectrum(dy.DynamoConfig(N=40))
    assert np.all(np.diff(ev.real) <= 0)


def test_family_parameters():
    cfg = dy.DynamoConfig(N=30)
    f = dy.dynamo_family(cfg, "C")
    assert np.array_equal(f(1.0), dy.assemble_dynamo(cfg).matrix)
    with pytest.raises(ConfigError):
        dy.dynamo_family(cfg, "l")


def test_warp_scan_has_transition():
    cfg = dy.DynamoConfig(N=80, bc_kind="idealized")
    fam = dy.dynamo_family(cfg, "zeta")
    st_ = bt.TrackerSettings(keep=6, select="rightmost")
    eps = bt.find_eps(bt.sweep(fam, (-1.0, 0.0), 21, st_), fam, 1e-8, st_, classify=False)
    assert len(eps) >= 1
    assert all(e.eigenvalue.real < 0 for e in eps)
