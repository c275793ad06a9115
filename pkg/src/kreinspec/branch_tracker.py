"""Eigenvalue continuation, exceptional-point location and triple-point search.

A *family* is any callable mapping a real parameter to a square matrix of
fixed dimension; a *two-parameter family* maps ``(primary, secondary)``.
All eigenvalue work goes through :func:`kreinspec.numkit.dense_eigs`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .errors import (
    AmbiguityError,
    AmbiguousBracketError,
    DegenerateThresholdError,
    InvalidInputError,
    StepRefinementError,
    WindowError,
)
from .numkit import DEFAULT_TOLERANCES, EigenCluster, JordanType, MultiplicityReport, dense_eigs, jordan_structure

__all__ = [
    "TrackerSettings",
    "SpectralBranch",
    "ExceptionalPoint",
    "ExponentFit",
    "TriplePointCandidate",
    "sweep",
    "find_eps",
    "ep_exponent_check",
    "find_triple_point",
    "cluster_discriminant",
]

Family = Callable[[float], np.ndarray]
Family2 = Callable[[float, float], np.ndarray]


@dataclass(frozen=True)
class TrackerSettings:
    """Knobs of the continuation engine.

    ``keep``/``select`` restrict tracking to part of a large spectrum:
    ``"rightmost"`` keeps the largest real parts, ``"lowest"`` the smallest.
    """

    reality_tol: float = 1e-8
    jump_factor: float = 10.0
    jump_floor: float = 1e-12
    contraction: float = 0.85
    max_refine: int = 8
    exact_assignment_max: int = 64
    tie_break: float = 1e-9
    keep: int | None = None
    select: str = "all"
    margin: int = 4
    workers: int = 1

    def is_real(self, lam):
        lam = np.asarray(lam)
        return np.abs(lam.imag) < self.reality_tol * (1.0 + np.abs(lam))


DEFAULT_SETTINGS = TrackerSettings()


@dataclass
class SpectralBranch:
    branch_id: int
    params: np.ndarray
    values: np.ndarray
    reality_flags: np.ndarray

    @property
    def samples(self) -> list[tuple[float, complex]]:
        return list(zip(self.params.tolist(), self.values.tolist()))


@dataclass
class ExceptionalPoint:
    parameter: float
    eigenvalue: complex
    branch_ids: tuple[int, int]
    order: int = 2
    jordan_type: JordanType | None = None
    gap: float = 0.0
    width: float = 0.0
    transition: str = ""  # "real->complex" or "complex->real" in increasing parameter

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
            "branch_ids": list(self.branch_ids),
            "order": self.order,
            "jordan_type": None if self.jordan_type is None else self.jordan_type.value,
            "residuals": {"gap": self.gap, "bisection_width": self.width},
            "transition": self.transition,
        }


@dataclass
class ExponentFit:
    exponent: float
    intercept: float
    n_points: int
    window: tuple[float, float]

    @property
    def is_square_root(self) -> bool:
        return abs(self.exponent - 0.5) <= 0.1


@dataclass
class TriplePointCandidate:
    primary_parameter: float
    secondary_parameter: float
    eigenvalue: complex
    jordan_type: JordanType | None
    ep_separation_history: list[tuple[float, float]] = field(default_factory=list)
    coalesced: bool = True
    secondary_bracket: tuple[float, float] = (math.nan, math.nan)
    report: MultiplicityReport | None = None

    def to_dict(self) -> dict:
        return {
            "coalesced": self.coalesced,
            "primary_parameter": self.primary_parameter,
            "secondary_parameter": self.secondary_parameter,
            "secondary_bracket": list(self.secondary_bracket),
            "eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
            "jordan_type": None if self.jordan_type is None else self.jordan_type.value,
            "rank_filtration": None if self.report is None else list(self.report.rank_filtration),
            "ep_separation_history": [list(h) for h in self.ep_separation_history],
        }


# ---------------------------------------------------------------------------
# matching


def _select(eigs: np.ndarray, n: int | None, how: str) -> np.ndarray:
    if n is None or n >= eigs.size or how == "all":
        return eigs
    if how == "rightmost":
        order = np.lexsort((-eigs.imag, -eigs.real))
    elif how == "lowest":
        order = np.lexsort((eigs.imag, eigs.real))
    else:
        raise InvalidInputError(f"unknown selection rule {how!r}")
    return eigs[order[:n]]


def _match(prev: np.ndarray, cand: np.ndarray, settings: TrackerSettings) -> np.ndarray:
    """Column index into ``cand`` for each entry of ``prev`` (minimal total distance)."""
    dist = np.abs(prev[:, None] - cand[None, :])
    # On a line, every non-crossing assignment has the same total distance once
    # the step motion exceeds the gaps; the squared term picks the most even
    # motions. The key term breaks exact real <-> conjugate-pair ties the same
    # way in both sweep directions.
    scale = float(dist.max()) or 1.0
    key_p = prev.real + prev.imag
    key_c = cand.real + cand.imag
    cost = dist + settings.tie_break * (dist**2 / scale + np.abs(key_p[:, None] - key_c[None, :]))
    if prev.size <= settings.exact_assignment_max:
        rows, cols = linear_sum_assignment(cost)
        out = np.empty(prev.size, dtype=int)
        out[rows] = cols
        return out
    # greedy: cheapest remaining pair first
    out = np.full(prev.size, -1, dtype=int)
    used = np.zeros(cand.size, dtype=bool)
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), cand.size)
        if out[i] < 0 and not used[j]:
            out[i] = j
            used[j] = True
            if np.all(out >= 0):
                break
    return out


def _spectra(family: Family, params, settings: TrackerSettings) -> list[np.ndarray]:
    def one(p):
        return dense_eigs(family(float(p)))

    if settings.workers > 1 and len(params) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            return list(pool.map(one, params))
    return [one(p) for p in params]


def _candidates(eigs: np.ndarray, settings: TrackerSettings) -> np.ndarray:
    if settings.keep is None:
        return eigs
    return _select(eigs, settings.keep + settings.margin, settings.select)


def _refined_assignment(family, p0, e0, p1, cand1, bound, full, depth, settings):
    """Assign ``e0`` (values at p0) into ``cand1`` (eigenvalues at p1) via midpoints.

    Returns the column indices, or raises StepRefinementError when halving
    the step does not make the motion contract.
    """
    pm = 0.5 * (p0 + p1)
    cand_m = _candidates(dense_eigs(family(pm)), settings)
    em = cand_m[_match(e0, cand_m, settings)]
    left = float(np.max(np.abs(em - e0)))
    cols = _match(em, cand1, settings)
    right = float(np.max(np.abs(cand1[cols] - em)))
    worst = max(left, right)
    if worst <= bound or depth >= settings.max_refine:
        return cols
    if worst > settings.contraction * full:
        raise StepRefinementError(p0, p1, full, bound)
    if left > bound:
        em = cand_m[_refined_assignment(family, p0, e0, pm, cand_m, bound, left, depth + 1, settings)]
    if right > bound:
        cols = _refined_assignment(family, pm, em, p1, cand1, bound, right, depth + 1, settings)
    return cols


def sweep(family: Family, param_range, steps: int, settings: TrackerSettings = DEFAULT_SETTINGS) -> list[SpectralBranch]:
    """Continue every eigenvalue of ``family`` over an equispaced grid.

    Consecutive spectra are matched by minimal total distance. A step whose
    largest matched motion exceeds ``jump_factor`` times the median step
    motion is re-examined by recursive halving. It is accepted when the
    motion contracts by at least ``contraction`` per halving, which both
    linear motion and square-root or cube-root branch points do. Otherwise
    StepRefinementError asks for a finer grid.
    """
    lo, hi = float(param_range[0]), float(param_range[1])
    if not lo < hi:
        raise InvalidInputError(f"need lo < hi, got [{lo}, {hi}]")
    if steps < 2:
        raise InvalidInputError("need at least 2 steps")
    params = np.linspace(lo, hi, int(steps))
    raw = _spectra(family, params, settings)
    if len({e.size for e in raw}) != 1:
        raise InvalidInputError("family changes dimension across the sweep")
    spectra = [_candidates(e, settings) for e in raw]

    n_track = settings.keep if settings.keep is not None else spectra[0].size
    first = _select(spectra[0], n_track, settings.select)
    # canonical initial labelling
    first = first[np.lexsort((first.imag, first.real))]

    values = np.empty((params.size, n_track), dtype=complex)
    values[0] = first
    motion = np.zeros(params.size - 1)
    cols_all = []
    for k in range(1, params.size):
        cols = _match(values[k - 1], spectra[k], settings)
        cols_all.append(cols)
        values[k] = spectra[k][cols]
        motion[k - 1] = np.max(np.abs(values[k] - values[k - 1]))

    scale = 1.0 + float(np.max(np.abs(values)))
    bound = max(settings.jump_factor * float(np.median(motion)), settings.jump_floor * scale)
    for k in np.nonzero(motion > bound)[0]:
        # re-match this step through refined midpoints, then redo the tail
        cols = _refined_assignment(family, params[k], values[k], params[k + 1], spectra[k + 1],
                                   bound, motion[k], 0, settings)
        values[k + 1] = spectra[k + 1][cols]
        for j in range(k + 2, params.size):
            values[j] = spectra[j][_match(values[j - 1], spectra[j], settings)]

    flags = settings.is_real(values)
    return [
        SpectralBranch(branch_id=i, params=params.copy(), values=values[:, i].copy(), reality_flags=flags[:, i].copy())
        for i in range(n_track)
    ]


# ---------------------------------------------------------------------------
# exceptional points


def _nearest(eigs: np.ndarray, center: complex, n: int) -> np.ndarray:
    return eigs[np.argsort(np.abs(eigs - center), kind="stable")[:n]]


def _pair_at(family, p, ref, settings):
    """The eigenvalues at ``p`` continuing the pair ``ref``, and whether they are non-real."""
    eigs = dense_eigs(family(p))
    pair = eigs[_match(ref, eigs, settings)]
    return bool(not np.all(settings.is_real(pair))), pair


def _bisect_ep(family, lo, hi, complex_lo, ref, precision, settings):
    """Bisect on "the pair is non-real", continuing the pair from the lower end."""
    # interior probes guard against a non-monotone predicate
    probes = np.linspace(lo, hi, 5)
    states, refs = [complex_lo], [ref]
    for p in probes[1:-1]:
        st, pair = _pair_at(family, p, refs[-1], settings)
        states.append(st)
        refs.append(pair)
    states.append(not complex_lo)
    changes = sum(a != b for a, b in zip(states[:-1], states[1:]))
    if changes != 1:
        raise AmbiguousBracketError(lo, hi)
    i = next(k for k in range(4) if states[k] != states[k + 1])
    lo, hi, ref = probes[i], probes[i + 1], refs[i]

    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        st, pair = _pair_at(family, mid, ref, settings)
        if st == complex_lo:
            lo, ref = mid, pair
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    _, pair = _pair_at(family, mid, ref, settings)
    return mid, pair, hi - lo


def find_eps(branches: list[SpectralBranch], family: Family, precision: float = 1e-10,
             settings: TrackerSettings = DEFAULT_SETTINGS, classify: bool = True) -> list[ExceptionalPoint]:
    """Locate real <-> complex-conjugate transitions of branch pairs by bisection.

    Each bracket comes from a sample interval in which two branches flip their
    reality flags together. It is refined by bisecting on "the two
    eigenvalues nearest the pair are non-real" until its width is at most
    ``precision``.
    """
    if not branches:
        return []
    params = branches[0].params
    vals = np.column_stack([b.values for b in branches])
    flags = np.column_stack([b.reality_flags for b in branches])
    eps: list[ExceptionalPoint] = []
    for k in range(params.size - 1):
        flipping = np.nonzero(flags[k] != flags[k + 1])[0]
        done: set[int] = set()
        for i in flipping:
            if i in done:
                continue
            # complex side of the interval
            side = k + 1 if flags[k, i] else k
            # a real pair turning into a conjugate pair flips both flags the same way;
            # opposite flips (partner exchange through a triple point) are not EP2s
            others = [j for j in flipping if j != i and j not in done and flags[k, j] == flags[k, i]]
            if not others:
                continue
            j = min(others, key=lambda j: abs(vals[side, j] - np.conj(vals[side, i])))
            done.update((i, j))
            complex_lo = not flags[k, i]
            ref = np.array([vals[k, i], vals[k, j]])
            p, pair, width = _bisect_ep(family, params[k], params[k + 1], complex_lo, ref, precision, settings)
            ep = ExceptionalPoint(
                parameter=float(p),
                eigenvalue=complex(pair.mean()),
                branch_ids=(int(min(i, j)), int(max(i, j))),
                order=2,
                gap=float(abs(pair[0] - pair[1])),
                width=float(width),
                transition="complex->real" if complex_lo else "real->complex",
            )
            if classify:
                ep.jordan_type = _classify_pair(family(p), pair)
            eps.append(ep)
    eps.sort(key=lambda e: (e.parameter, e.eigenvalue.real))
    return eps


def _classify_pair(A, pair) -> JordanType | None:
    cluster = EigenCluster(center=complex(np.mean(pair)), members=list(pair), diameter=float(abs(pair[0] - pair[1])))
    try:
        return jordan_structure(A, cluster).jordan_type
    except DegenerateThresholdError:
        return None


def ep_exponent_check(ep: ExceptionalPoint, family: Family, window: tuple[float, float] | None = None,
                      points: int = 8, neighbors: list[ExceptionalPoint] | None = None) -> ExponentFit:
    """Fit gap ~ |p - p*|^exponent for the pair coalescing at ``ep``.

    Samples ``points`` log-spaced offsets per side inside ``window`` (one
    decade by default). The default window's upper end is a tenth of the
    distance to the nearest other EP, capped at 1e-3 (1 + |p*|). Its lower
    end must stay well above the bisection width, otherwise the location
    error would bias the slope.
    """
    pstar = ep.parameter
    if window is None:
        w_hi = 1e-3 * (1.0 + abs(pstar))
        others = [abs(o.parameter - pstar) for o in (neighbors or []) if o is not ep and o.parameter != pstar]
        if others:
            w_hi = min(w_hi, 0.1 * min(others))
        window = (w_hi / 10.0, w_hi)
    w_lo, w_hi = window
    if not 0 < w_lo < w_hi:
        raise WindowError(f"invalid window {window}")
    if w_lo < 100.0 * ep.width:
        raise WindowError(f"window {window} too close to the bisection width {ep.width:.2e}")

    offs = np.geomspace(w_lo, w_hi, points)
    xs, ys = [], []
    for sign in (-1.0, 1.0):
        for d in offs:
            pair = _nearest(dense_eigs(family(pstar + sign * d)), ep.eigenvalue, 2)
            gap = abs(pair[0] - pair[1])
            if gap > 0:
                xs.append(math.log(d))
                ys.append(math.log(gap))
    if len(xs) < 4:
        raise WindowError(f"only {len(xs)} usable points in window {window}")
    slope, intercept = np.polyfit(xs, ys, 1)
    return ExponentFit(exponent=float(slope), intercept=float(intercept), n_points=len(xs), window=(w_lo, w_hi))


# ---------------------------------------------------------------------------
# triple points


def cluster_discriminant(eigs: np.ndarray) -> float:
    """prod_{i<j} (l_i - l_j)^2 of a conjugation-closed eigenvalue cluster (real)."""
    eigs = np.asarray(eigs, dtype=complex)
    d = eigs[:, None] - eigs[None, :]
    iu = np.triu_indices(eigs.size, 1)
    return float(np.prod(d[iu] ** 2).real)


class _PairTracker:
    """Follows an EP pair of a two-parameter family through the 3-cluster discriminant.

    For a real family, the discriminant of the three eigenvalues nearest the
    pair changes sign exactly at the EPs. The pair exists at a secondary
    value iff that discriminant reaches the sign it has between the EPs
    somewhere in the tracked window.
    """

    def __init__(self, model2: Family2, center_eig: complex, sign_in: float, limits: tuple[float, float]):
        self.model2 = model2
        self.center = center_eig
        self.sign_in = sign_in
        self.limits = limits

    def f(self, p: float, s: float) -> float:
        eigs = _nearest(dense_eigs(self.model2(p, s)), self.center, 3)
        return self.sign_in * cluster_discriminant(eigs)

    def probe(self, s: float, center: float, half: float, grid: int = 41):
        lo = max(center - half, self.limits[0])
        hi = min(center + half, self.limits[1])
        ps = np.linspace(lo, hi, grid)
        vals = np.array([self.f(p, s) for p in ps])
        i = int(np.argmax(vals))
        a, b = ps[max(i - 1, 0)], ps[min(i + 1, grid - 1)]
        if b > a:
            res = minimize_scalar(lambda p: -self.f(p, s), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-15 * max(1.0, abs(a))})
            pmax, fmax = float(res.x), float(-res.fun)
            if fmax < vals[i]:
                pmax, fmax = float(ps[i]), float(vals[i])
        else:
            pmax, fmax = float(ps[i]), float(vals[i])
        if fmax <= 0:
            return None
        if vals[0] > 0 or vals[-1] > 0:
            return "edge"
        left = brentq(lambda p: self.f(p, s), lo, pmax, xtol=1e-15)
        right = brentq(lambda p: self.f(p, s), pmax, hi, xtol=1e-15)
        eigs = _nearest(dense_eigs(self.model2(pmax, s)), self.center, 3)
        self.center = complex(eigs.mean().real)
        return left, right


def find_triple_point(model2: Family2, primary_range, secondary_range, precision: float = 1e-6,
                      steps: int = 201, march: int = 8, ep_precision: float = 1e-12,
                      settings: TrackerSettings = DEFAULT_SETTINGS) -> TriplePointCandidate:
    """Follow the closest EP pair in the primary parameter until it coalesces.

    ``secondary_range = (start, stop)`` may run in either direction. At
    ``start`` the primary range is swept and the adjacent EP pair with the
    smallest separation is chosen. The secondary parameter is then marched
    towards ``stop`` and bisected on "both EPs still exist" down to width
    ``precision``. The coalescence point is classified by rank filtration
    of the three-eigenvalue cluster there.
    """
    s0, s1 = float(secondary_range[0]), float(secondary_range[1])
    plo, phi = float(primary_range[0]), float(primary_range[1])

    fam0 = lambda p: model2(p, s0)  # noqa: E731
    eps = find_eps(sweep(fam0, (plo, phi), steps, settings), fam0, ep_precision, settings, classify=False)
    if len(eps) < 2:
        raise InvalidInputError(f"need at least two EPs in the primary range at the secondary start, found {len(eps)}")

    seps = [(eps[i + 1].parameter - eps[i].parameter, i) for i in range(len(eps) - 1)]
    seps.sort()
    best, ib = seps[0]
    for other, io in seps[1:]:
        if abs(io - ib) > 1 and other <= 1.01 * best:
            raise AmbiguityError(eps)
    ea, eb = eps[ib], eps[ib + 1]

    # keep the window away from the other EPs found at the start
    lim_lo = eps[ib - 1].parameter if ib > 0 else plo
    lim_hi = eps[ib + 2].parameter if ib + 2 < len(eps) else phi
    lim_lo = 0.5 * (lim_lo + ea.parameter) if ib > 0 else lim_lo
    lim_hi = 0.5 * (lim_hi + eb.parameter) if ib + 2 < len(eps) else lim_hi

    center_eig = complex(0.5 * (ea.eigenvalue + eb.eigenvalue).real)
    pmid = 0.5 * (ea.parameter + eb.parameter)
    tracker = _PairTracker(model2, center_eig, 1.0, (lim_lo, lim_hi))
    tracker.sign_in = 1.0 if tracker.f(pmid, s0) > 0 else -1.0

    history = [(s0, eb.parameter - ea.parameter)]
    centers = [(s0, pmid)]

    def exists(s):
        # linear extrapolation of the pair center in the secondary parameter
        if len(centers) >= 2:
            (sa, ca), (sb, cb) = centers[-2], centers[-1]
            c = cb + (cb - ca) / (sb - sa) * (s - sb)
            drift = abs(c - cb)
        else:
            c, drift = centers[-1][1], 0.0
        half = max(3.0 * history[-1][1], 2.0 * drift, 1e-12 * (1.0 + abs(c)))
        for _ in range(6):
            out = tracker.probe(s, c, half)
            if out != "edge":
                break
            half *= 2.0
        if out is None or out == "edge":
            return None
        return out

    # march until the pair disappears
    s_lo, s_hi = s0, None
    for s in np.linspace(s0, s1, march + 1)[1:]:
        out = exists(s)
        if out is None:
            s_hi = float(s)
            break
        s_lo = float(s)
        history.append((s_lo, out[1] - out[0]))
        centers.append((s_lo, 0.5 * (out[0] + out[1])))

    if s_hi is None:
        eig = _nearest(dense_eigs(model2(centers[-1][1], s_lo)), tracker.center, 3)
        return TriplePointCandidate(
            primary_parameter=centers[-1][1], secondary_parameter=s_lo, eigenvalue=complex(eig.mean()),
            jordan_type=None, ep_separation_history=history, coalesced=False, secondary_bracket=(s_lo, s1),
        )

    while abs(s_hi - s_lo) > precision:
        s = 0.5 * (s_lo + s_hi)
        out = exists(s)
        if out is None:
            s_hi = s
        else:
            s_lo = s
            history.append((s, out[1] - out[0]))
            centers.append((s, 0.5 * (out[0] + out[1])))

    s_star = 0.5 * (s_lo + s_hi)
    p_star = centers[-1][1]
    A = model2(p_star, s_star)
    members = _nearest(dense_eigs(A), tracker.center, 3)
    d = np.abs(members[:, None] - members[None, :]).max()
    cluster = EigenCluster(center=complex(members.mean()), members=list(members), diameter=float(d))
    try:
        report = jordan_structure(A, cluster, DEFAULT_TOLERANCES.rank)
        jtype = report.jordan_type
    except DegenerateThresholdError:
        report, jtype = None, None
    return TriplePointCandidate(
        primary_parameter=float(p_star),
        secondary_parameter=float(s_star),
        eigenvalue=cluster.center,
        jordan_type=jtype,
        ep_separation_history=history,
        coalesced=True,
        secondary_bracket=(min(s_lo, s_hi), max(s_lo, s_hi)),
        report=report,
    )
