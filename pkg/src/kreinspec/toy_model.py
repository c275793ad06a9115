"""PT-symmetric matrix toy models.

A 2x2 pseudo-Hermitian warm-up whose exceptional points form the double cone
y^2 = |w|^2, and a real 4x4 pseudo-Hermitian matrix built from two such
subsystems coupled through ``z``. For the 4x4 model there is a closed-form
one-parameter family of coupled configurations with a triple eigenvalue,
and a polynomial path that blows the triple root up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .numkit import QuarticCoeffs

__all__ = [
    "PARITY",
    "TwoByTwoParams",
    "ToyParams",
    "TripleRootSolution",
    "two_by_two_matrix",
    "two_by_two_eigs",
    "assemble_h4",
    "char_coeffs",
    "uncoupled_eigs",
    "triple_root_params",
    "to_toy_params",
    "blowup_path",
]

PARITY = np.diag([1.0, 1.0, -1.0, -1.0])


@dataclass(frozen=True)
class TwoByTwoParams:
    x: float
    y: float
    w: complex


@dataclass(frozen=True)
class ToyParams:
    x1: float = 0.0
    y1: float = 0.0
    w1: float = 0.0
    x2: float = 0.0
    y2: float = 0.0
    w2: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        for k in _TOY_FIELDS:
            v = getattr(self, k)
            if not math.isfinite(v):
                raise ValueError(f"ToyParams.{k} is not finite: {v!r}")

    def with_(self, **changes) -> "ToyParams":
        return replace(self, **changes)


_TOY_FIELDS = tuple(f.name for f in fields(ToyParams))


@dataclass(frozen=True)
class TripleRootSolution:
    epsilon: int
    delta: int
    beta_c: float
    z_c: float
    x1_c: float
    lambda4_c: float
    x2_c: float
    y1_c: float
    y2_c: float


def two_by_two_matrix(p: TwoByTwoParams) -> np.ndarray:
    w = complex(p.w)
    if w.imag == 0:
        return np.array([[p.x + p.y, w.real], [-w.real, p.x - p.y]])
    return np.array([[p.x + p.y, w], [-np.conj(w), p.x - p.y]])


def two_by_two_eigs(p: TwoByTwoParams, tol: float = 1e-12) -> tuple[complex, complex, bool]:
    """Closed-form eigenvalues ``x -+ sqrt(y^2 - |w|^2)`` and an EP flag.

    The flag is set when ``|y^2 - |w|^2| <= tol * (y^2 + |w|^2)``, i.e. the
    parameters lie on the double cone.
    """
    disc = p.y**2 - abs(p.w) ** 2
    root = complex(np.sqrt(complex(disc)))
    is_ep = abs(disc) <= tol * max(p.y**2 + abs(p.w) ** 2, np.finfo(float).tiny)
    return complex(p.x) - root, complex(p.x) + root, bool(is_ep)


def assemble_h4(p: ToyParams) -> np.ndarray:
    """Real 4x4 matrix of the coupled model; satisfies P H^T P = H exactly."""
    return np.array(
        [
            [p.x1 + p.y1, 0.0, p.w1, p.z],
            [0.0, p.x2 + p.y2, 0.0, p.w2],
            [-p.w1, 0.0, p.x1 - p.y1, 0.0],
            [-p.z, -p.w2, 0.0, p.x2 - p.y2],
        ]
    )


def char_coeffs(p: ToyParams) -> QuarticCoeffs:
    """Characteristic polynomial det(H - l I) as a monic quartic."""
    d1 = p.y1**2 - p.w1**2
    d2 = p.y2**2 - p.w2**2
    s = p.x1 + p.x2
    z2 = p.z**2
    a3 = -2.0 * s
    a2 = -d1 - d2 + s**2 + 2.0 * p.x1 * p.x2 + z2
    a1 = 2.0 * (p.x1 * (d2 - p.x2**2) + p.x2 * (d1 - p.x1**2)) - z2 * (p.x1 - p.y1 + p.x2 + p.y2)
    a0 = (d1 - p.x1**2) * (d2 - p.x2**2) + z2 * (p.x1 - p.y1) * (p.x2 + p.y2)
    return QuarticCoeffs(a3, a2, a1, a0)


def uncoupled_eigs(p: ToyParams) -> np.ndarray:
    """The four eigenvalues at zero coupling (``p.z`` is ignored).

    Ordered as subsystem 1 (minus, plus) then subsystem 2 (minus, plus).
    """
    r1 = np.sqrt(complex(p.y1**2 - p.w1**2))
    r2 = np.sqrt(complex(p.y2**2 - p.w2**2))
    return np.array([p.x1 - r1, p.x1 + r1, p.x2 - r2, p.x2 + r2])


def triple_root_params(epsilon: int = 1, delta: int = 1, beta_c: float = 1.0,
                       z_c: float = 1.0, x1_c: float = 0.0) -> TripleRootSolution:
    """Closed-form parameters for which the coupled model has a triple root.

    Only the normalization ``beta_c = z_c = 1, x1_c = 0`` has closed forms;
    the three normalization values are stored on the result so downstream
    code never assumes them.
    """
    if epsilon not in (1, -1) or delta not in (1, -1):
        raise ValueError("epsilon and delta must be +1 or -1")
    if (beta_c, z_c, x1_c) != (1.0, 1.0, 0.0):
        raise NotImplementedError("closed forms exist only for beta_c = z_c = 1, x1_c = 0")
    lam4 = 3.0 + 2.0**1.5 * epsilon
    x2 = 0.5 * (lam4 + 3.0)
    root = math.sqrt(9.0 * lam4**2 + 2.0 * lam4 + 1.0)
    y1 = 0.5 * (-(3.0 * lam4 + 1.0) + delta * root)
    y2 = lam4 - 1.0 + 0.5 * delta * root
    return TripleRootSolution(
        epsilon=epsilon, delta=delta, beta_c=beta_c, z_c=z_c, x1_c=x1_c,
        lambda4_c=lam4, x2_c=x2, y1_c=y1, y2_c=y2,
    )


def to_toy_params(s: TripleRootSolution) -> ToyParams:
    # subsystem EP conditions imposed with w = +y
    return ToyParams(x1=s.x1_c, y1=s.y1_c, w1=s.y1_c, x2=s.x2_c, y2=s.y2_c, w2=s.y2_c, z=s.z_c)


def blowup_path(s: TripleRootSolution, t: float, z: float | None = None) -> ToyParams:
    """Point ``t`` on the polynomial path through the triple-root configuration.

    ``z`` overrides the coupling (default ``s.z_c``) so the path can be used
    as a two-parameter family.
    """
    return ToyParams(
        x1=s.x1_c,
        x2=s.x2_c + t,
        y1=s.y1_c + 2.0 * t**2,
        y2=s.y2_c - t**3,
        w1=s.y1_c - t,
        w2=s.y2_c + 3.0 * t**2,
        z=s.z_c if z is None else z,
    )
