"""Scalar variational problem behind a single subgraph-density constraint.

Everything in this module concerns the one-dimensional objective

    l(u) = theta * u**k - I(u),        u in [0, 1],

where ``I`` is half the negative Bernoulli entropy (see
:func:`bernoulli_entropy`), ``theta >= 0`` is the exponential-family
coupling and ``k >= 1`` plays the role of the edge count of the
constrained subgraph.  For small ``k`` the objective has a single interior
maximiser; above a critical edge count (:func:`critical_k`, approximately
4.591) there is a window of couplings with two local maximisers, and a
unique tie coupling ``theta_hat(k)`` at which both are global.  The tie
coupling and the pair of tied maximisers determine the coexistence
(equivalence-breaking) interval of constraint values handled in
:mod:`ensemblegap.phase`.

All functions are pure; the heavier ones are cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import xlogy

from .errors import ConvergenceError, DomainError

LOG2 = math.log(2.0)

#: Maximisers are searched for inside [EDGE_CLIP, 1 - EDGE_CLIP]; the
#: entropy derivative diverges at 0 and 1 so interior maximisers are
#: guaranteed, but for theta*k >~ 14 the upper root comes closer to 1 than
#: the clip and the search refuses rather than silently truncating.
EDGE_CLIP = 1e-12
GRID_POINTS = 2048
ROOT_TOL = 1e-12
TIE_TOL = 1e-10
#: ``find_theta_hat`` requires k > critical_k() + K_MARGIN.
K_MARGIN = 1e-6


def bernoulli_entropy(u):
    """Return I(u) = (u log u + (1-u) log(1-u)) / 2, with 0 log 0 := 0.

    Accepts a scalar or an array; values must lie in [0, 1].  The result is
    in [-log(2)/2, 0], minimised at u = 1/2 and symmetric about it.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"u must lie in [0, 1], got {u!r}")
    out = 0.5 * (xlogy(arr, arr) + xlogy(1.0 - arr, 1.0 - arr))
    if arr.ndim == 0:
        return float(out)
    return out


def entropy_rate_p(u, p):
    """Relative-entropy rate of density u against a reference density p.

    Returns u log(u/p) + (1-u) log((1-u)/(1-p)) for u in [0, 1] and
    p in (0, 1); zero exactly when u == p.  Related to
    :func:`bernoulli_entropy` by I(u) = entropy_rate_p(u, 1/2)/2 - log(2)/2.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"u must lie in [0, 1], got {u!r}")
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    out = (
        xlogy(arr, arr)
        - arr * math.log(p)
        + xlogy(1.0 - arr, 1.0 - arr)
        - (1.0 - arr) * math.log(1.0 - p)
    )
    if arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ObjectiveParams:
    """Parameter pair (theta, k) of the objective theta*u**k - I(u)."""

    theta: float
    k: float

    def __post_init__(self):
        if not self.theta >= 0.0:
            raise DomainError(f"theta must be >= 0, got {self.theta}")
        if not self.k >= 1.0:
            raise DomainError(f"k must be >= 1, got {self.k}")


def objective(u, params: ObjectiveParams):
    """Evaluate theta*u**k - I(u); scalar or array u in [0, 1]."""
    arr = np.asarray(u, dtype=float)
    out = params.theta * np.power(arr, params.k) - bernoulli_entropy(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def objective_derivative(u, params: ObjectiveParams):
    """d/du of the objective: theta*k*u**(k-1) - log(u/(1-u))/2.

    Only defined on the open interval (0, 1).
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("derivative requires u in (0, 1)")
    out = params.theta * params.k * np.power(arr, params.k - 1.0) - 0.5 * (
        np.log(arr) - np.log1p(-arr)
    )
    if arr.ndim == 0:
        return float(out)
    return out


def _objective_second_derivative(u: float, params: ObjectiveParams) -> float:
    return params.theta * params.k * (params.k - 1.0) * u ** (params.k - 2.0) - 1.0 / (
        2.0 * u * (1.0 - u)
    )


class GlobalMax(Enum):
    """Which stationary maximiser is global."""

    U1 = "u1"
    U2 = "u2"
    BOTH = "both"


@dataclass(frozen=True)
class StationaryProfile:
    """Local maximisers of the objective on (0, 1), sorted ascending.

    ``u1`` is always present; ``u2`` only in the two-maxima window.  A sole
    maximiser is reported as ``u1`` regardless of which branch it continues.
    """

    params: ObjectiveParams
    u1: float
    value1: float
    u2: float | None = None
    value2: float | None = None
    global_max: GlobalMax = GlobalMax.U1

    @property
    def maxima(self) -> list[float]:
        return [self.u1] if self.u2 is None else [self.u1, self.u2]

    @property
    def values(self) -> list[float]:
        return [self.value1] if self.value2 is None else [self.value1, self.value2]

    def global_maximiser(self) -> float:
        """The global maximiser (``u1`` when tied)."""
        return self.u2 if self.global_max is GlobalMax.U2 else self.u1

    def global_value(self) -> float:
        return max(self.values)


def _bisect_root(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish_root(u: float, params: ObjectiveParams, lo: float, hi: float) -> float:
    # Newton refinement; stays inside the bisection bracket.
    for _ in range(4):
        d2 = _objective_second_derivative(u, params)
        if d2 == 0.0:
            break
        step = objective_derivative(u, params) / d2
        nxt = u - step
        if not lo < nxt < hi:
            break
        if nxt <= 0.0 or nxt >= 1.0:
            break
        u = nxt
        if abs(step) < 1e-17:
            break
    return u


def find_local_maxima(params: ObjectiveParams, grid_points: int = GRID_POINTS) -> StationaryProfile:
    """Locate all local maximisers of the objective on (0, 1).

    Sign changes of the derivative are bracketed on a uniform grid over
    [EDGE_CLIP, 1 - EDGE_CLIP], refined by bisection to ``ROOT_TOL`` and
    polished by Newton steps.  The objective has at most two maxima for
    theta >= 0, k >= 1; finding more (or none) raises
    :class:`ConvergenceError`, as does a derivative still positive at the
    upper clip (maximiser indistinguishable from u = 1 at this resolution).
    """
    grid = np.linspace(EDGE_CLIP, 1.0 - EDGE_CLIP, grid_points)
    deriv = objective_derivative(grid, params)
    if deriv[-1] > 0.0:
        raise ConvergenceError(
            "derivative positive at 1 - 1e-12; the upper maximiser is out of range "
            f"(theta={params.theta}, k={params.k})"
        )

    maxima: list[float] = []
    sign = np.sign(deriv)
    for i in range(len(grid) - 1):
        si, sj = sign[i], sign[i + 1]
        if si == 0.0:
            # Exact zero on a grid node: classify by neighbours.
            left = sign[i - 1] if i > 0 else 1.0
            if left > 0.0 >= sj:
                maxima.append(grid[i])
            continue
        if si > 0.0 > sj:
            root = _bisect_root(
                lambda u: objective_derivative(u, params), grid[i], grid[i + 1], ROOT_TOL
            )
            maxima.append(_polish_root(root, params, grid[i], grid[i + 1]))

    if not maxima:
        raise ConvergenceError(
            f"no interior maximiser found (theta={params.theta}, k={params.k})"
        )
    if len(maxima) > 2:
        raise ConvergenceError(
            f"{len(maxima)} local maxima found; at most 2 are possible "
            f"(theta={params.theta}, k={params.k})"
        )

    values = [objective(u, params) for u in maxima]
    if len(maxima) == 1:
        return StationaryProfile(params, maxima[0], values[0])
    gap = values[1] - values[0]
    if abs(gap) <= TIE_TOL:
        flag = GlobalMax.BOTH
    elif gap > 0.0:
        flag = GlobalMax.U2
    else:
        flag = GlobalMax.U1
    return StationaryProfile(params, maxima[0], values[0], maxima[1], values[1], flag)


@lru_cache(maxsize=None)
def critical_k() -> float:
    """Smallest k admitting two local maximisers for some theta >= 0.

    Solves ((k-1)/k) * log(k-1) = 1 on [2, 10] by bisection; approximately
    4.5911.  Below this value the objective is single-peaked for every
    coupling and no tie coupling exists.
    """
    return _bisect_root(lambda k: (k - 1.0) / k * math.log(k - 1.0) - 1.0, 2.0, 10.0, 1e-14)


@dataclass(frozen=True)
class CriticalTheta:
    """Tie coupling theta_hat(k) and its pair of tied maximisers."""

    k: float
    theta_hat: float
    u1: float
    u2: float

    def __post_init__(self):
        if not self.u2 > self.u1:
            raise DomainError("tied maximisers must satisfy u1 < u2")


def theta_hat_bracket(k: float) -> tuple[float, float]:
    """Analytic lower/upper bounds bracketing the tie coupling theta_hat(k).

    Derived by comparing the objective at u = 1/2 and u = 1 with the values
    at the maximisers; both bounds converge to log(2)/2 as k grows.  Falls
    back to [0, 10] if the bounds cross numerically.
    """
    pk = 0.5**k
    lo = (LOG2 + math.log(1.0 - 1.0 / k) + (1.0 / k) * math.log(1.0 / (k - 1.0))) / (
        2.0 * (1.0 - pk)
    )
    denom = 1.0 - pk * (1.0 + k)
    hi = LOG2 / (2.0 * denom) if denom > 0.0 else float("inf")
    if not (0.0 <= lo < hi < float("inf")):
        return 0.0, 10.0
    return lo, hi


@lru_cache(maxsize=None)
def find_theta_hat(k: float) -> CriticalTheta:
    """Find the unique coupling at which both local maxima tie, for k above
    :func:`critical_k`.

    Bisection on theta of the sign of value(u2) - value(u1), started from
    :func:`theta_hat_bracket`.  When a trial coupling lies outside the
    two-maxima window the sole maximiser is classified by comparing it with
    (k-1)/k (the upper branch always exceeds that threshold) so the
    bisection still contracts onto the window.
    """
    k = float(k)
    k_min = critical_k() + K_MARGIN
    if not k > k_min:
        raise DomainError(f"k must exceed {k_min:.7f} for a tie coupling, got {k}")

    split = (k - 1.0) / k

    def upper_wins(theta: float) -> bool:
        prof = find_local_maxima(ObjectiveParams(theta, k))
        if prof.u2 is not None:
            return prof.value2 >= prof.value1
        return prof.u1 > split

    lo, hi = theta_hat_bracket(k)
    if upper_wins(lo) or not upper_wins(hi):
        lo, hi = 0.0, 10.0  # bounds failed; fall back to a wide bracket
    for _ in range(200):
        if hi - lo < 1e-13:
            break
        mid = 0.5 * (lo + hi)
        if upper_wins(mid):
            hi = mid
        else:
            lo = mid
    theta = 0.5 * (lo + hi)
    prof = find_local_maxima(ObjectiveParams(theta, k))
    if prof.u2 is None:
        raise ConvergenceError(f"two-maxima window not resolved at k={k}")
    return CriticalTheta(k, theta, prof.u1, prof.u2)


def psi_infinity(theta: float, k: float) -> float:
    """Limiting pressure: the maximum of the objective over [0, 1]."""
    prof = find_local_maxima(ObjectiveParams(theta, k))
    return prof.global_value()
