"""Built-in oracle suites behind ``kreinspec verify``.

Each suite returns a list of :class:`Check` records; a suite passes iff all
of its checks pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import spherical_jn

from . import dynamo, squire, toy_model
from .errors import ConfigError
from .numkit import EigenCluster, jordan_structure, poly_eval, poly_roots

__all__ = ["Check", "SUITES", "run_suite", "spherical_bessel_zeros", "constant_alpha_eigenvalues"]


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _le(name, value, limit):
    return Check(name, float(value), float(limit), bool(value <= limit))


def spherical_bessel_zeros(l: int, count: int) -> np.ndarray:
    """First ``count`` positive zeros of j_l, bracketed on a fine grid and refined with brentq."""
    f = lambda x: spherical_jn(l, x)  # noqa: E731
    zeros = []
    x = np.linspace(0.5, (count + l + 2) * math.pi, 40 * (count + l + 2))
    y = f(x)
    for i in np.nonzero(np.sign(y[:-1]) != np.sign(y[1:]))[0]:
        zeros.append(brentq(f, x[i], x[i + 1], xtol=1e-15))
        if len(zeros) == count:
            break
    return np.array(zeros)


def constant_alpha_eigenvalues(alpha0: float, l: int, count: int) -> np.ndarray:
    """The ``count`` rightmost values of -kappa^2 +- alpha0 kappa over zeros kappa of j_l."""
    kappa = spherical_bessel_zeros(l, 2 * count + 4)
    lam = np.concatenate([-kappa**2 + alpha0 * kappa, -kappa**2 - alpha0 * kappa])
    return np.sort(lam)[::-1][:count]


def toy_triple_root(params: dict) -> list[Check]:
    checks = []
    for eps, dlt in params.get("branches", [[1, 1], [1, -1], [-1, 1], [-1, -1]]):
        sol = toy_model.triple_root_params(eps, dlt)
        p = toy_model.to_toy_params(sol)
        coeffs = toy_model.char_coeffs(p).as_array()
        tag = f"eps={eps:+d} delta={dlt:+d}"
        for k in range(3):
            checks.append(_le(f"{tag} |Delta^({k})(1)|", abs(poly_eval(coeffs, 1.0, k)), 1e-9))
        roots = poly_roots(coeffs)
        fourth = roots[np.argmax(np.abs(roots - 1.0))]
        checks.append(_le(f"{tag} |lambda4 - (3+2^1.5 eps)|", abs(fourth - sol.lambda4_c), 1e-10))
        H = toy_model.assemble_h4(p)
        ev = np.linalg.eigvals(H)
        members = ev[np.argsort(np.abs(ev - 1.0))[:3]]
        cluster = EigenCluster(center=1.0 + 0j, members=list(members),
                               diameter=float(np.abs(members[:, None] - members[None, :]).max()))
        rep = jordan_structure(H, cluster, 1e-8)
        ok = tuple(rep.rank_filtration) == (3, 2, 1)
        checks.append(Check(f"{tag} rank filtration {tuple(rep.rank_filtration)} == (3, 2, 1)", 0.0 if ok else 1.0, 0.0, ok))
    return checks


def dynamo_constant_alpha(params: dict) -> list[Check]:
    l = int(params.get("l", 1))
    N = int(params.get("N", 400))
    alpha0 = float(params.get("alpha0", 1.0))
    count = int(params.get("count", 10))
    exact = constant_alpha_eigenvalues(alpha0, l, count)

    def rightmost(n):
        cfg = dynamo.DynamoConfig(l=l, N=n, bc_kind="idealized", profile=dynamo.AlphaProfile(constant=alpha0))
        return dynamo.dynamo_spectrum(cfg)[:count]

    num = rightmost(N)
    rel = np.abs(num - exact) / np.abs(exact)
    checks = [_le(f"max relative error, {count} rightmost (N={N})", rel.max(), 1e-3)]
    coarse = rightmost(N // 2)
    order = math.log2(np.abs(coarse[0] - exact[0]) / np.abs(num[0] - exact[0]))
    checks.append(Check(f"convergence order N={N // 2}->{N}", order, 2.0, bool(1.7 <= order <= 2.3)))
    return checks


def squire_oscillator(params: dict) -> list[Check]:
    N = int(params.get("N", 64))
    b = float(params.get("b", 6.0))
    ev = squire.squire_spectrum(squire.SquireConfig(g=1.0, nu=0.0, b=b, N=N), 4).eigenvalues
    exact = np.array([1.0, 3.0, 5.0, 7.0])
    return [_le(f"|E_{n} - {exact[n]:g}| (b={b:g}, N={N})", abs(ev[n] - exact[n]), 1e-6) for n in range(4)]


def box_exact(params: dict) -> list[Check]:
    N = int(params.get("N", 64))
    b = float(params.get("b", math.pi / 2))
    count = int(params.get("count", 5))
    ev = squire.squire_spectrum(squire.SquireConfig(g=0.0, nu=0.0, b=b, N=N), count).eigenvalues
    checks = []
    for n in range(1, count + 1):
        exact = (n * math.pi / (2.0 * b)) ** 2
        checks.append(_le(f"|E_{n} - (n pi/2b)^2| (b={b:g}, N={N})", abs(ev[n - 1] - exact), 1e-8))
    return checks


SUITES = {
    "toy-triple-root": toy_triple_root,
    "dynamo-constant-alpha": dynamo_constant_alpha,
    "squire-oscillator": squire_oscillator,
    "box-exact": box_exact,
}


def run_suite(name: str, params: dict | None = None) -> list[Check]:
    if name not in SUITES:
        raise ConfigError(f"unknown verify suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name](params or {})
