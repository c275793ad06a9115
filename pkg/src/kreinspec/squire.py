"""Chebyshev collocation for -psi'' + g y^2 (iy)^nu psi = E psi on [-b, b], psi(+-b) = 0.

For nu != 0 the potential g |y|^(2+nu) exp(i pi nu sgn(y)/2) is not smooth
at y = 0, which limits a single Chebyshev expansion over [-b, b] to
algebraic convergence. The default discretization therefore uses two
elements [-b, 0] and [0, b], glued by continuity of psi and psi' at y = 0,
and recovers spectral accuracy. ``elements=1`` gives the single-domain
collocation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dynamo import DiscretizedOperator
from .errors import ConfigError, DomainError, SingularityError
from .numkit import dense_eigs

__all__ = [
    "SquireConfig",
    "SquireSpectrum",
    "cheb_diff",
    "potential",
    "assemble_squire",
    "pt_real_form",
    "squire_spectrum",
    "squire_family",
]


@dataclass(frozen=True)
class SquireConfig:
    g: float = 1.0
    nu: float = 0.0
    b: float = 1.0
    N: int = 64
    elements: int = 2

    def __post_init__(self):
        if not self.b > 0:
            raise ConfigError(f"half-length b must be positive, got {self.b!r}")
        if int(self.N) != self.N or self.N < 16:
            raise ConfigError(f"resolution N must be an integer >= 16, got {self.N!r}")
        if self.elements not in (1, 2):
            raise ConfigError(f"elements must be 1 or 2, got {self.elements!r}")
        if self.elements == 2 and self.N % 2:
            raise ConfigError(f"two-element collocation needs an even N, got {self.N}")


@dataclass
class SquireSpectrum:
    eigenvalues: np.ndarray
    unresolved: np.ndarray  # per-eigenvalue flag: lies in the upper third of the resolved range

    def __len__(self):
        return len(self.eigenvalues)


def cheb_diff(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Gauss-Lobatto nodes cos(pi j/N) on [-1, 1] and the differentiation matrix.

    Nodes are evaluated as sin(pi (N - 2j) / 2N) so that they are exactly
    antisymmetric and the middle node of even N is exactly zero.
    """
    x = np.sin(np.pi * (N - 2.0 * np.arange(N + 1)) / (2.0 * N))
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** np.arange(N + 1)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def potential(cfg: SquireConfig, y):
    """g y^2 (iy)^nu with the principal branch: g |y|^(2+nu) exp(i pi nu sgn(y)/2).

    Satisfies V(-y) = conj(V(y)) exactly.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.abs(y_arr) > cfg.b * (1 + 1e-12)):
        raise DomainError(f"y must lie in [-b, b] = [-{cfg.b}, {cfg.b}]")
    at_zero = y_arr == 0
    if np.any(at_zero) and cfg.nu <= -2:
        raise SingularityError(f"potential is singular at y = 0 for nu = {cfg.nu} <= -2")
    phase = np.exp(0.5j * np.pi * cfg.nu * np.sign(y_arr))
    with np.errstate(divide="ignore"):
        mag = np.where(at_zero, 0.0, np.abs(y_arr) ** (2.0 + cfg.nu))
    v = cfg.g * mag * phase
    return complex(v) if v.ndim == 0 else v


def assemble_squire(cfg: SquireConfig) -> DiscretizedOperator:
    """-D2 + diag(V) on the interior collocation nodes, ascending in y.

    Dirichlet rows and columns are removed. With two elements the shared
    node y = 0 is eliminated through the derivative matching condition,
    which leaves N - 2 unknowns; a single element leaves N - 1.
    """
    if cfg.elements == 1:
        x, D = cheb_diff(cfg.N)
        D2 = (D @ D)[1:-1, 1:-1] / cfg.b**2
        y = cfg.b * x[1:-1]
        H = -D2.astype(complex) + np.diag(potential(cfg, y))
        meta = f"Chebyshev N={cfg.N} on [-{cfg.b:g}, {cfg.b:g}], psi(+-b)=0 by row/column removal"
        return DiscretizedOperator(matrix=H[::-1, ::-1].copy(), grid=y[::-1].copy(), meta=meta)

    ne = cfg.N // 2
    x, D = cheb_diff(ne)
    # right element y = b (1 + x) / 2 with nodes reordered to ascend: index 0 is y = 0
    x, D = x[::-1], D[::-1, ::-1]
    Dr = D * (2.0 / cfg.b)
    D2 = Dr @ Dr
    yr = 0.5 * cfg.b * (1.0 + x)
    inner = slice(1, ne)
    m = ne - 1
    # left element is the mirror image: y -> -y flips the sign of d/dy only
    # psi'(0) continuity: Dr[0] psi_r = -Dr[0] psi_l (mirrored) => solve for psi(0)
    denom = 2.0 * Dr[0, 0]
    c = -Dr[0, inner] / denom  # psi(0) = c . psi_r_inner + c . psi_l_inner (mirrored order)

    blk = -D2[inner, inner]
    col0 = -D2[inner, 0]
    Vr = potential(cfg, yr[inner])
    H = np.zeros((2 * m, 2 * m), dtype=complex)
    # right half, unknown order ascending in y: indices m..2m-1
    H[m:, m:] = blk + np.diag(Vr) + np.outer(col0, c)
    # left half in mirrored order (node k of the right element <-> index m-1-k)
    rev = slice(None, None, -1)
    Vl = potential(cfg, -yr[inner])
    H[:m, :m] = (blk + np.diag(Vl) + np.outer(col0, c))[rev, rev]
    H[m:, :m] = np.outer(col0, c)[:, rev]
    H[:m, m:] = np.outer(col0, c)[rev, :]
    y = np.concatenate([-yr[inner][::-1], yr[inner]])
    meta = (f"two-element Chebyshev, {ne} intervals per element on [-{cfg.b:g}, 0] and [0, {cfg.b:g}]; "
            "psi(+-b)=0 by removal, psi(0) eliminated via psi' continuity")
    return DiscretizedOperator(matrix=H, grid=y, meta=meta)


def pt_real_form(matrix: np.ndarray) -> np.ndarray:
    """Real matrix unitarily similar to a collocation matrix that commutes with PT.

    The nodes are symmetric (node j <-> node n-1-j), and the antilinear map
    psi -> conj(psi(-y)) fixes the real span of (e_j + e_j')/sqrt2,
    i(e_j - e_j')/sqrt2 and the center node. In that basis the operator is
    real. Real LAPACK then returns exact conjugate pairs and exactly real
    eigenvalues, which keeps reality flags free of rounding noise.
    """
    n = matrix.shape[0]
    U = np.zeros((n, n), dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    for j in range(n // 2):
        U[j, 2 * j] = U[n - 1 - j, 2 * j] = s
        U[j, 2 * j + 1] = 1j * s
        U[n - 1 - j, 2 * j + 1] = -1j * s
    if n % 2:
        U[n // 2, n - 1] = 1.0
    R = U.conj().T @ matrix @ U
    scale = max(np.abs(R).max(), 1.0)
    if np.abs(R.imag).max() > 1e-10 * scale:
        raise ValueError("matrix does not commute with the PT reflection of the node set")
    return R.real.copy()


def squire_spectrum(cfg: SquireConfig, k: int) -> SquireSpectrum:
    """The ``k`` eigenvalues with smallest real part, ascending.

    Eigenvalues in the upper third of the resolved range are flagged as
    unresolved, and a warning is issued if any of the returned ones are.
    """
    op = assemble_squire(cfg)
    if not 1 <= k <= op.matrix.shape[0]:
        raise ValueError(f"k must lie in [1, {op.matrix.shape[0]}], got {k}")
    ev = dense_eigs(pt_real_form(op.matrix))
    ev = ev[np.lexsort((ev.imag, ev.real))]
    unresolved = np.arange(ev.size) >= (2 * ev.size) // 3
    if np.any(unresolved[:k]):
        warnings.warn(
            f"{int(unresolved[:k].sum())} of the requested eigenvalues lie in the upper third "
            f"of the N={cfg.N} discretization and are not resolved",
            stacklevel=2,
        )
    return SquireSpectrum(eigenvalues=ev[:k], unresolved=unresolved[:k])


def squire_family(cfg: SquireConfig, param: str = "b"):
    """One-parameter family of real PT-form matrices varying ``b``, ``nu`` or ``g``."""
    if param not in ("b", "nu", "g"):
        raise ConfigError(f"squire sweep parameter must be 'b', 'nu' or 'g', got {param!r}")

    def family(value: float) -> np.ndarray:
        return pt_real_form(assemble_squire(replace(cfg, **{param: float(value)})).matrix)

    return family
