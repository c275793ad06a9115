"""Finite-difference realization of the spherically symmetric alpha^2-dynamo operator.

The operator acts on a poloidal/toroidal pair (u1, u2) as::

    H = [[-Q[1],  alpha ],
         [ Q[alpha], -Q[1]]]

    Q[a] u = -(d/dr + 1/r) a(r) (d/dr + 1/r) u + a(r) l(l+1)/r^2 u

Nodes sit at r_j = j h, j = 1..N, h = 1/N; the origin is never a node and
u(0) = 0 enters through the first flux. The factor (d/dr + 1/r) is
discretized as a node-to-midpoint map and its adjoint-like
midpoint-to-node map, so Q[a] = -A2 diag(a(r_mid)) A1 + diag(a l(l+1)/r^2).
That is the usual conservative second-order stencil for -(a v')' in the
variable v = r u. For constant alpha, Q[alpha] = alpha Q[1] holds exactly
in the discretization.

Boundary conditions at r = 1:

* ``idealized``: u1(1) = u2(1) = 0.
* ``realistic``: u2(1) = 0 and u1'(1) + (l+1) u1(1) = 0 (matching to a
  decaying exterior potential). u1(1) is then an unknown, and its row is a
  half-cell balance that uses the boundary flux exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError
from .numkit import dense_eigs

__all__ = [
    "ALPHA_COEFFS",
    "AlphaProfile",
    "BoundaryKind",
    "DynamoConfig",
    "DiscretizedOperator",
    "alpha_eval",
    "q_operator",
    "assemble_dynamo",
    "dynamo_spectrum",
    "dynamo_family",
]

# (constant, zeta-slope) per power of r: r^0, r^2, r^3, r^4
ALPHA_COEFFS = {
    0: (-21.465, -2.467),
    2: (426.412, 167.928),
    3: (-806.729, -436.289),
    4: (392.276, 272.991),
}


@dataclass(frozen=True)
class AlphaProfile:
    """Quartic alpha(r) with overall amplitude ``C`` and warp parameter ``zeta``.

    ``constant`` replaces the quartic by a uniform alpha (used for oracles).
    """

    C: float = 1.0
    zeta: float = 0.0
    constant: float | None = None

    def polynomial(self) -> np.ndarray:
        """Coefficients of alpha(r) in increasing powers of r."""
        if self.constant is not None:
            return np.array([float(self.constant)])
        p = np.zeros(5)
        for power, (a, b) in ALPHA_COEFFS.items():
            p[power] = self.C * (a + b * self.zeta)
        return p

    def __call__(self, r):
        return np.polynomial.polynomial.polyval(r, self.polynomial())


class BoundaryKind(str, enum.Enum):
    IDEALIZED = "idealized"
    REALISTIC = "realistic"


@dataclass(frozen=True)
class DynamoConfig:
    l: int = 1
    N: int = 200
    bc_kind: BoundaryKind = BoundaryKind.REALISTIC
    profile: AlphaProfile = field(default_factory=AlphaProfile)

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ConfigError(f"angular degree l must be a positive integer, got {self.l!r}")
        if int(self.N) != self.N or self.N < 16:
            raise ConfigError(f"grid resolution N must be an integer >= 16, got {self.N!r}")
        object.__setattr__(self, "bc_kind", BoundaryKind(self.bc_kind))


@dataclass
class DiscretizedOperator:
    matrix: np.ndarray
    grid: np.ndarray
    meta: str = ""
    blocks: tuple[int, ...] = ()

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError("operator matrix must be square")
        if self.blocks and sum(self.blocks) != n:
            raise ValueError(f"block sizes {self.blocks} do not add up to dimension {n}")


def alpha_eval(profile: AlphaProfile, r):
    """alpha(r) on [0, 1]; raises DomainError outside."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(r_arr > 1.0):
        raise DomainError(f"alpha profile is defined on 0 <= r <= 1, got {r!r}")
    out = profile(r_arr)
    return float(out) if np.ndim(out) == 0 else out


def q_operator(alpha, l: int, N: int, robin: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Matrix of Q[alpha] and its nodes.

    Unknowns are u(r_j) for j = 1..N-1 (Dirichlet at r = 1) or j = 1..N when
    ``robin`` is set; in the latter case the last row enforces
    u'(1) + (l+1) u(1) = 0 through the boundary flux.
    """
    h = 1.0 / N
    n = N if robin else N - 1
    r = h * np.arange(1, n + 1)
    mid = h * (np.arange(N) + 0.5)  # r_{k+1/2}, k = 0..N-1
    ll = l * (l + 1)

    # A1: nodes -> midpoints, (r_{k+1} u_{k+1} - r_k u_k) / (h r_{k+1/2})
    A1 = np.zeros((N, n))
    k = np.arange(N)
    right = k < n
    A1[k[right], k[right]] = r[k[right]] / (h * mid[right])
    left = (k >= 1) & (k <= n)
    A1[k[left], k[left] - 1] = -r[k[left] - 1] / (h * mid[left])

    # A2: midpoints -> nodes, (r_{j+1/2} f_{j+1/2} - r_{j-1/2} f_{j-1/2}) / (h r_j)
    A2 = np.zeros((n, N))
    j = np.arange(n)
    A2[j, j] = -mid[j] / (h * r)
    up = j + 1 < N
    A2[j[up], j[up] + 1] = mid[j[up] + 1] / (h * r[up])

    a_mid = np.asarray(alpha(mid), dtype=float) * np.ones(N)
    a_node = np.asarray(alpha(r), dtype=float) * np.ones(n)
    Q = -A2 @ (a_mid[:, None] * A1) + np.diag(a_node * ll / r**2)

    if robin:
        # half cell [1 - h/2, 1]: boundary flux a(1) (u' + u/r)(1) = -l a(1) u(1)
        a1 = float(np.asarray(alpha(np.array([1.0])), dtype=float).ravel()[0])
        inner_flux = mid[-1] * a_mid[-1] * A1[-1]
        row = (2.0 / h) * inner_flux
        row[-1] += (2.0 / h) * l * a1
        row[-1] += a1 * ll
        Q[-1] = row
    return Q, r


def assemble_dynamo(cfg: DynamoConfig) -> DiscretizedOperator:
    """Dense 2x2 block matrix of the dynamo operator on the uniform grid."""
    alpha = cfg.profile
    robin = cfg.bc_kind is BoundaryKind.REALISTIC
    ones = lambda x: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731

    Q1_pol, r1 = q_operator(ones, cfg.l, cfg.N, robin=robin)
    Q1_tor, r2 = q_operator(ones, cfg.l, cfg.N, robin=False)
    Qa, _ = q_operator(alpha, cfg.l, cfg.N, robin=robin)
    n1, n2 = r1.size, r2.size

    H = np.zeros((n1 + n2, n1 + n2))
    H[:n1, :n1] = -Q1_pol
    # alpha * u2; u2(1) = 0 so the realistic boundary row gets no coupling
    H[np.arange(n2), n1 + np.arange(n2)] = alpha(r2)
    H[n1:, :n1] = Qa[:n2, :]
    H[n1:, n1:] = -Q1_tor

    if robin:
        meta = (f"l={cfg.l} N={cfg.N} realistic: u1'(1)+(l+1)u1(1)=0 (half-cell row {n1 - 1}), "
                f"u2(1)=0; u(0)=0")
    else:
        meta = f"l={cfg.l} N={cfg.N} idealized: u1(1)=u2(1)=0; u(0)=0"
    return DiscretizedOperator(matrix=H, grid=np.concatenate([r1, r2]), meta=meta, blocks=(n1, n2))


def dynamo_spectrum(cfg: DynamoConfig) -> np.ndarray:
    """Eigenvalues sorted by real part, largest first."""
    ev = dense_eigs(assemble_dynamo(cfg).matrix)
    return ev[np.lexsort((-ev.imag, -ev.real))]


def dynamo_family(cfg: DynamoConfig, param: str = "zeta"):
    """One-parameter matrix family varying ``zeta`` or ``C`` of the profile."""
    if param not in ("zeta", "C"):
        raise ConfigError(f"dynamo sweep parameter must be 'zeta' or 'C', got {param!r}")

    def family(value: float) -> np.ndarray:
        prof = replace(cfg.profile, **{param: float(value)})
        return assemble_dynamo(replace(cfg, profile=prof)).matrix

    return family
