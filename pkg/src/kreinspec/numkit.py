"""Numerical kernels shared by every model.

Polynomial roots, the quartic discriminant, a thin dense eigensolver wrapper,
SVD rank estimation, single-linkage eigenvalue clustering and Jordan-structure
inference by rank filtration.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.cluster.hierarchy import fcluster, linkage

from .errors import DegenerateThresholdError, InvalidInputError, SolverFailure

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "QuarticCoeffs",
    "EigenCluster",
    "JordanType",
    "MultiplicityReport",
    "poly_roots",
    "poly_eval",
    "quartic_discriminant",
    "dense_eigs",
    "numerical_rank",
    "cluster_eigs",
    "jordan_structure",
    "conjugate_mismatch",
]


@dataclass(frozen=True)
class Tolerances:
    """Tolerance defaults for the numerical kernels.

    Call sites read these instead of hard-coding numbers, so a run config can
    replace any of them.
    """

    rank: float = 1e-8
    cluster: float = 1e-6
    polish_iters: int = 10
    diameter_factor: float = 10.0


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of the monic quartic l^4 + a3 l^3 + a2 l^2 + a1 l + a0."""

    a3: float
    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a3, self.a2, self.a1, self.a0)):
            raise InvalidInputError(f"non-finite quartic coefficients {self}")

    def as_array(self) -> np.ndarray:
        """Coefficients highest degree first, including the leading 1."""
        return np.array([1.0, self.a3, self.a2, self.a1, self.a0])


@dataclass
class EigenCluster:
    center: complex
    members: list[complex]
    diameter: float

    @property
    def size(self) -> int:
        return len(self.members)


class JordanType(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    SIMPLE = "simple"
    DOUBLE_DEFECTIVE = "double-defective"
    DIAGONAL = "diagonal"
    DEFECTIVE = "defective"  # algebraic >= 4 with a nontrivial chain


@dataclass
class MultiplicityReport:
    eigenvalue: complex
    algebraic: int
    geometric: int
    rank_filtration: list[int] = field(default_factory=list)
    jordan_type: JordanType = JordanType.SIMPLE

    @property
    def block_sizes(self) -> list[int]:
        """Jordan block sizes, largest first, read off the rank filtration."""
        dim = self.rank_filtration[0] + self.geometric
        ranks = [dim] + list(self.rank_filtration)
        # nullity increments (Weyr characteristic) conjugate to block sizes
        weyr = [ranks[k] - ranks[k + 1] for k in range(len(ranks) - 1)]
        return [sum(1 for w in weyr if w > j) for j in range(weyr[0])] if weyr else []


def _as_coeff_array(coeffs) -> np.ndarray:
    c = np.asarray(coeffs)
    if c.ndim != 1 or c.size < 2:
        raise InvalidInputError("need a polynomial of degree >= 1")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError(f"non-finite polynomial coefficient in {c!r}")
    if not np.isclose(c[0], 1.0, rtol=0, atol=1e-14):
        raise InvalidInputError(f"polynomial must be monic, leading coefficient is {c[0]!r}")
    return c.astype(complex if np.iscomplexobj(c) else float)


def poly_eval(coeffs, x, deriv: int = 0):
    """Horner evaluation of a polynomial (highest degree first) or its derivative."""
    c = np.asarray(coeffs)
    if deriv:
        c = np.polyder(c, deriv)
    return np.polyval(c, x)


def poly_roots(coeffs, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Roots of a monic polynomial given highest degree first.

    Roots are eigenvalues of the companion matrix, each then polished by at
    most ``tol.polish_iters`` damped Newton steps. A step is only accepted if
    it lowers the residual, so polishing never makes a root worse.
    """
    c = _as_coeff_array(coeffs)
    n = c.size - 1
    companion = np.zeros((n, n), dtype=c.dtype)
    companion[0, :] = -c[1:]
    if n > 1:
        companion[np.arange(1, n), np.arange(n - 1)] = 1.0
    roots = dense_eigs(companion).astype(complex)

    dc = np.polyder(c)
    for i, x in enumerate(roots):
        fx = np.polyval(c, x)
        for _ in range(tol.polish_iters):
            if fx == 0:
                break
            d = np.polyval(dc, x)
            if d == 0:
                break
            step = fx / d
            for _ in range(6):
                trial = x - step
                ft = np.polyval(c, trial)
                if abs(ft) < abs(fx):
                    x, fx = trial, ft
                    break
                step *= 0.5
            else:
                break
        roots[i] = x
    return roots


def quartic_discriminant(c: QuarticCoeffs) -> float:
    """Discriminant of the monic quartic; zero iff a root is repeated."""
    b, cc, d, e = c.a3, c.a2, c.a1, c.a0
    return (
        256 * e**3
        - 192 * b * d * e**2
        - 128 * cc**2 * e**2
        + 144 * cc * d**2 * e
        - 27 * d**4
        + 144 * b**2 * cc * e**2
        - 6 * b**2 * d**2 * e
        - 80 * b * cc**2 * d * e
        + 18 * b * cc * d**3
        + 16 * cc**4 * e
        - 4 * cc**3 * d**2
        - 27 * b**4 * e**2
        + 18 * b**3 * cc * d * e
        - 4 * b**3 * d**3
        - 4 * b**2 * cc**3 * e
        + b**2 * cc**2 * d**2
    )


def dense_eigs(A, vectors: bool = False):
    """Eigenvalues (and optionally right eigenvectors) of a dense square matrix.

    Delegates to LAPACK ``geev``. Real input goes through the real driver, so
    complex eigenvalues come back as exact conjugate pairs.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        if vectors:
            w, v = np.linalg.eig(A)
            return w.astype(complex), v.astype(complex)
        return np.linalg.eigvals(A).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(A.shape[0]) from exc


def numerical_rank(A, tol_scale: float = DEFAULT_TOLERANCES.rank, atol: float = 0.0) -> int:
    """Number of singular values above ``max(tol_scale * sigma_max, atol)``."""
    A = np.atleast_2d(np.asarray(A))
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    smax = s[0] if s.size else 0.0
    return int(np.count_nonzero(s > max(tol_scale * smax, atol)))


def cluster_eigs(eigs, tol: float = DEFAULT_TOLERANCES.cluster) -> list[EigenCluster]:
    """Single-linkage clusters of complex eigenvalues with linkage distance ``tol``.

    Clusters are ordered by (real part, imaginary part) of their centers.
    """
    if tol <= 0:
        raise InvalidInputError("cluster tolerance must be positive")
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        return []
    if eigs.size == 1:
        labels = np.array([1])
    else:
        pts = np.column_stack([eigs.real, eigs.imag])
        labels = fcluster(linkage(pts, method="single"), t=tol, criterion="distance")

    clusters = []
    for lab in np.unique(labels):
        members = eigs[labels == lab]
        center = complex(members.mean())
        diam = float(np.max(np.abs(members[:, None] - members[None, :]))) if members.size > 1 else 0.0
        clusters.append(EigenCluster(center=center, members=[complex(m) for m in members], diameter=diam))
    clusters.sort(key=lambda c: (c.center.real, c.center.imag))
    return clusters


def _classify(algebraic: int, geometric: int) -> JordanType:
    if algebraic == 3:
        return {1: JordanType.I, 2: JordanType.II, 3: JordanType.III}[geometric]
    if algebraic == 1:
        return JordanType.SIMPLE
    if geometric == algebraic:
        return JordanType.DIAGONAL
    if algebraic == 2:
        return JordanType.DOUBLE_DEFECTIVE
    return JordanType.DEFECTIVE


def jordan_structure(A, cluster: EigenCluster, tol_scale: float = DEFAULT_TOLERANCES.rank,
                     diameter_factor: float = DEFAULT_TOLERANCES.diameter_factor) -> MultiplicityReport:
    """Multiplicities and rank filtration of ``A`` at a clustered eigenvalue.

    The cluster's eigenvalues are moved to the leading block of a reordered
    complex Schur form ``A = Z T Z^H``. Since the rest of the spectrum is
    bounded away from the cluster, nullity((A - cI)^k) equals the nullity of
    ``M^k`` with ``M = T11 - cI``, and the rank filtration is
    ``dim - nullity``. Working on the small block keeps the thresholds
    meaningful for large, badly scaled discretizations.

    The k-th power is thresholded at
    ``max(tol_scale * ||A||, diameter_factor * diameter) * ||M||^(k-1)``,
    because a perturbation of a defective eigenvalue by eps splits it by
    eps^(1/n), which is what the cluster diameter measures.
    """
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    dim = A.shape[0]
    n = cluster.size
    c = complex(cluster.center)

    T, Z = scipy.linalg.schur(A.astype(complex), output="complex")
    d = np.abs(np.diag(T) - c)
    order = np.sort(d)
    if n < dim:
        if order[n] - order[n - 1] <= 0:
            raise DegenerateThresholdError(
                "cluster is not separated from the rest of the spectrum; adjust the cluster tolerance"
            )
        radius = 0.5 * (order[n - 1] + order[n])
        T, Z, sdim = scipy.linalg.schur(A.astype(complex), output="complex",
                                        sort=lambda x: abs(x - c) <= radius)
        if sdim != n:
            raise DegenerateThresholdError(
                f"Schur reordering selected {sdim} eigenvalues for a cluster of {n}; adjust the cluster tolerance"
            )
    M = T[:n, :n] - c * np.eye(n)

    anorm = np.linalg.norm(A, 2)
    mnorm = np.linalg.norm(M, 2)
    base = max(tol_scale * anorm, diameter_factor * cluster.diameter)
    nullities = []
    Mk = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        Mk = Mk @ M
        thr = base * max(mnorm, base) ** (k - 1)
        nullities.append(n - numerical_rank(Mk, tol_scale=0.0, atol=thr))
    filtration = [dim - v for v in nullities]

    weyr = np.diff([0] + nullities)
    if np.any(weyr < 0) or np.any(np.diff(weyr) > 0) or nullities[-1] != n or nullities[0] < 1:
        raise DegenerateThresholdError(
            f"inconsistent rank filtration {filtration} for a cluster of size {n} at {c}; "
            "adjust tol_scale or the cluster tolerance"
        )
    geometric = nullities[0]
    return MultiplicityReport(
        eigenvalue=c,
        algebraic=n,
        geometric=geometric,
        rank_filtration=filtration,
        jordan_type=_classify(n, geometric),
    )


def conjugate_mismatch(eigs) -> float:
    """Largest distance from an eigenvalue to its matched conjugate partner.

    Uses an optimal assignment between the multiset and its conjugate, so a
    conjugation-closed spectrum gives zero.
    """
    from scipy.optimize import linear_sum_assignment

    eigs = np.asarray(eigs, dtype=complex)
    cost = np.abs(eigs[:, None] - np.conj(eigs)[None, :])
    r, cidx = linear_sum_assignment(cost)
    return float(cost[r, cidx].max()) if eigs.size else 0.0
