"""Phase structure of the single-constraint ensemble pair.

For a constrained density T* and subgraph edge count k, ensemble
equivalence holds exactly when the point (T*, J_k(T*)) lies on the convex
minorant of J_k(x) = I(x**(1/k)).  Equivalence fails on an open interval
(T1(k), T2(k)) of constraint values, the coexistence interval, pinned by
the tie coupling of :mod:`ensemblegap.variational`; T1 and T2 are the k-th
powers of the tied maximisers.  This module computes that interval, the
critical curve k_c(T*) with its pivot (T0, k0), the coupling that realises
a given constraint, closed forms for the specific relative entropy and the
spectral gap where the conditioned graph is replica symmetric, and an
independent hull-based membership oracle.

Replica symmetry depends on the maximum degree d of the subgraph, not just
its edge count: the entropy/gap formulas hold on
(T1(k), T1(d)] u [T2(d), T2(k)), the whole interval when d is below the
pivot edge count, and nowhere when d = k.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import ConvergenceError, DomainError
from .variational import (
    ObjectiveParams,
    bernoulli_entropy,
    critical_k,
    find_local_maxima,
    find_theta_hat,
)

__all__ = [
    "BeeInterval",
    "PhaseDiagram",
    "Regime",
    "RegimeReport",
    "MinorantFn",
    "IntervalUnion",
    "solve_k0_T0",
    "bee_interval",
    "critical_curve",
    "k_c_of_T",
    "lagrange_multiplier",
    "convex_minorant",
    "convex_minorant_oracle",
    "replica_symmetric_bee_region",
    "s_infinity",
    "delta_infinity",
    "regime_report",
    "eigenvalue_curves",
    "j_value",
    "j_derivative",
    "entropy_expansion_coefficient",
    "gap_expansion_coefficient",
    "boundary_scaling_ratios",
]

HULL_CONTACT_TOL = 1e-12


# ---------------------------------------------------------------------------
# rescaled entropy J_k and the pivot


def j_value(x, k: float):
    """J_k(x) = I(x**(1/k)); scalar or array, x in [0, 1]."""
    return bernoulli_entropy(np.power(x, 1.0 / k))


def j_derivative(x: float, k: float) -> float:
    """dJ_k/dx = log(u/(1-u)) * u / (2*k*x) at u = x**(1/k), for x in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise DomainError("j_derivative requires x in (0, 1)")
    u = x ** (1.0 / k)
    return 0.5 * math.log(u / (1.0 - u)) * (1.0 / k) * x ** (1.0 / k - 1.0)


@lru_cache(maxsize=None)
def solve_k0_T0() -> tuple[float, float]:
    """Pivot of the critical curve: k0 solves ((k-1)/k) log(k-1) = 1,
    T0 = ((k0-1)/k0)**k0.  Approximately (4.5911, 0.32373)."""
    k0 = critical_k()
    t0 = ((k0 - 1.0) / k0) ** k0
    return k0, t0


# ---------------------------------------------------------------------------
# coexistence interval and critical curve


@dataclass(frozen=True)
class BeeInterval:
    """Coexistence interval (T1, T2) for edge count k, with its tie coupling."""

    k: float
    theta_hat: float
    T1: float
    T2: float

    @property
    def width(self) -> float:
        return self.T2 - self.T1

    def contains(self, t_star: float) -> bool:
        return self.T1 < t_star < self.T2


@lru_cache(maxsize=None)
def bee_interval(k: float) -> BeeInterval:
    """Equivalence breaks exactly for constraint values inside (T1, T2),
    the k-th powers of the tied maximisers at the tie coupling."""
    crit = find_theta_hat(k)  # raises DomainError for k <= k0
    return BeeInterval(crit.k, crit.theta_hat, crit.u1**crit.k, crit.u2**crit.k)


@dataclass(frozen=True)
class PhaseDiagram:
    """Sampled critical curve: rows (k, T1(k), T2(k)) plus the pivot."""

    k: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    k0: float
    T0: float

    def rows(self):
        return zip(self.k.tolist(), self.T1.tolist(), self.T2.tolist())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "T1", "T2"])
            for k, t1, t2 in self.rows():
                writer.writerow([f"{k:.17g}", f"{t1:.17g}", f"{t2:.17g}"])

    def write_pivot_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"k0": self.k0, "T0": self.T0}, fh, indent=2)
            fh.write("\n")


def critical_curve(k_min: float = 4.592, k_max: float = 8.0, step: float = 0.002) -> PhaseDiagram:
    """Tabulate (k, T1(k), T2(k)) on a uniform k-grid.

    T1 is strictly decreasing and T2 strictly increasing in k; the default
    grid starts just above the pivot with increments of 0.002.
    """
    k0, t0 = solve_k0_T0()
    if not k_min > k0:
        raise DomainError(f"k_min must exceed the pivot {k0:.6f}, got {k_min}")
    if k_max < k_min or step <= 0.0:
        raise DomainError("need k_max >= k_min and step > 0")
    n = int(math.floor((k_max - k_min) / step + 1e-9)) + 1
    ks = k_min + step * np.arange(n)
    t1 = np.empty(n)
    t2 = np.empty(n)
    for i, k in enumerate(ks):
        iv = bee_interval(float(k))
        t1[i], t2[i] = iv.T1, iv.T2
    return PhaseDiagram(ks, t1, t2, k0, t0)


def k_c_of_T(t_star: float, k_hi_cap: float = 38.0) -> float:
    """Critical edge count for a constraint value: equivalence holds for
    k <= k_c(T*) and breaks for larger k.

    Inverts the monotone boundary branches by bisection (T1 for T* below
    the pivot value T0, T2 above) to within 1e-9 in k.
    """
    if not 0.0 < t_star < 1.0:
        raise DomainError(f"T* must lie in (0, 1), got {t_star}")
    k0, t0 = solve_k0_T0()
    if abs(t_star - t0) <= 1e-9:
        return k0
    below = t_star < t0

    def boundary(k: float) -> float:
        iv = bee_interval(k)
        return iv.T1 if below else iv.T2

    lo = k0 + 1e-5
    hi = max(2.0 * math.log2(1.0 / t_star), lo + 1.0) if below else lo + 1.0
    # expand until the boundary has crossed t_star
    for _ in range(64):
        if hi > k_hi_cap:
            raise DomainError(
                f"k_c({t_star}) exceeds the supported edge-count range (~{k_hi_cap})"
            )
        crossed = boundary(hi) < t_star if below else boundary(hi) > t_star
        if crossed:
            break
        hi *= 1.5
    else:
        raise DomainError("failed to bracket k_c")
    for _ in range(200):
        if hi - lo < 1e-9:
            break
        mid = 0.5 * (lo + hi)
        past = boundary(mid) < t_star if below else boundary(mid) > t_star
        if past:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lagrange_multiplier(t_star: float, k: float) -> float:
    """Coupling theta* realising constraint value T* for edge count k.

    Outside the coexistence interval this solves (u*(theta))**k = T* using
    the monotone global maximiser; inside it the coupling is pinned at the
    tie value theta_hat(k).  Constraint values below (1/2)**k would need a
    negative coupling and are rejected.
    """
    if not 0.0 < t_star < 1.0:
        raise DomainError(f"T* must lie in (0, 1), got {t_star}")
    floor = 0.5**k
    if t_star < floor:
        raise DomainError(
            f"T* = {t_star} below (1/2)**k = {floor:.6g}: negative coupling unsupported"
        )
    if k > critical_k() + 1e-6:
        iv = bee_interval(k)
        if iv.contains(t_star):
            return iv.theta_hat

    def glob_power(theta: float) -> float:
        prof = find_local_maxima(ObjectiveParams(theta, k))
        return prof.global_maximiser() ** k

    lo, hi = 0.0, 1.0
    for _ in range(64):
        if glob_power(hi) >= t_star:
            break
        hi *= 2.0
    else:
        raise DomainError(f"failed to bracket theta for T*={t_star}, k={k}")
    for _ in range(200):
        if hi - lo < 1e-13:
            break
        mid = 0.5 * (lo + hi)
        if glob_power(mid) >= t_star:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# convex-minorant membership oracle (independent of the tie-coupling solver)


@dataclass(frozen=True)
class MinorantFn:
    """Tabulated convex minorant of J_k on [0, 1].

    ``knots``/``values`` trace the lower convex hull of a dense sample of
    the graph of J_k; every knot is a contact point with J_k.  For k above
    the pivot the contact set omits exactly one open interval, exposed as
    ``gap``; the minorant is linear across it.
    """

    k: float
    knots: np.ndarray
    values: np.ndarray
    gap: tuple[float, float] | None

    def value_at(self, x) -> np.ndarray:
        return np.interp(x, self.knots, self.values)

    def vertical_gap(self, x) -> np.ndarray:
        """J_k(x) minus the minorant; ~0 on the contact set, > 0 off it."""
        return j_value(x, self.k) - self.value_at(x)

    def on_minorant(self, x, tol: float = HULL_CONTACT_TOL) -> bool:
        return bool(self.vertical_gap(x) <= tol)


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Monotone-chain lower hull of points sorted by x."""
    hx: list[float] = []
    hy: list[float] = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        while len(hx) >= 2 and (hy[-1] - hy[-2]) * (x - hx[-1]) >= (y - hy[-1]) * (
            hx[-1] - hx[-2]
        ):
            hx.pop()
            hy.pop()
        hx.append(x)
        hy.append(y)
    return np.asarray(hx), np.asarray(hy)


def _minorant_grid(k: float, base_points: int) -> np.ndarray:
    # Uniform in x, uniform in u = x**(1/k) (dense near 0 where the
    # curvature of J_k blows up), and geometric toward x = 1.
    xs = np.concatenate(
        [
            np.linspace(0.0, 1.0, base_points),
            np.power(np.linspace(0.0, 1.0, base_points), k),
            1.0 - np.geomspace(1e-13, 0.5, 4001),
            np.array([1.0]),
        ]
    )
    return np.unique(xs)


@lru_cache(maxsize=None)
def convex_minorant(k: float, base_points: int = 100001) -> MinorantFn:
    """Convex minorant of J_k via a lower hull of sampled points.

    Two passes: a hull on a curvature-adapted grid locates the single
    non-contact knot gap (if any), then the sample is refined around both
    gap endpoints and the hull rebuilt, so the linear piece matches the
    true double tangent to ~1e-15 vertically.  Independent of the
    tie-coupling machinery by construction.
    """
    xs = _minorant_grid(k, base_points)
    hx, hy = _lower_hull(xs, j_value(xs, k))
    spacing = np.diff(hx)
    i = int(np.argmax(spacing))
    gap = None
    if spacing[i] > 50.0 / base_points:
        lo, hi = hx[i], hx[i + 1]
        # refine around both contact points and rebuild
        h = 2e-5
        extra = np.concatenate(
            [
                np.linspace(max(lo - h, 0.0), min(lo + h, 1.0), 20001),
                np.linspace(max(hi - h, 0.0), min(hi + h, 1.0), 20001),
            ]
        )
        xs = np.unique(np.concatenate([xs, extra]))
        hx, hy = _lower_hull(xs, j_value(xs, k))
        spacing = np.diff(hx)
        i = int(np.argmax(spacing))
        gap = (float(hx[i]), float(hx[i + 1]))
    return MinorantFn(k, hx, hy, gap)


def convex_minorant_oracle(t_star: float, k: float, tol: float = HULL_CONTACT_TOL) -> bool:
    """Equivalence test by minorant membership: True iff (T*, J_k(T*)) lies
    on the convex minorant of J_k (vertical gap at most ``tol``).

    On the contact set the hull interpolation error is one-sided (the hull
    runs through sampled points of a convex stretch, chords above the
    curve), so the tolerance only needs to absorb rounding.
    """
    if not 0.5**k - 1e-12 <= t_star < 1.0:
        raise DomainError(f"T* must lie in [(1/2)**k, 1), got {t_star} for k={k}")
    return convex_minorant(k).on_minorant(t_star, tol)


# ---------------------------------------------------------------------------
# replica-symmetric region and the closed forms living on it


@dataclass(frozen=True)
class IntervalUnion:
    """Union of disjoint intervals with per-end openness flags."""

    intervals: tuple[tuple[float, float, bool, bool], ...]  # (lo, hi, lo_open, hi_open)

    def __contains__(self, x: float) -> bool:
        for lo, hi, lo_open, hi_open in self.intervals:
            above = x > lo if lo_open else x >= lo
            below = x < hi if hi_open else x <= hi
            if above and below:
                return True
        return False

    @property
    def empty(self) -> bool:
        return not self.intervals


def _rs_region(k: float, d: float) -> IntervalUnion:
    if d > k:
        raise DomainError(f"maximum degree d={d} cannot exceed edge count k={k}")
    k0, _ = solve_k0_T0()
    if k <= k0 or d == k:
        return IntervalUnion(())
    iv = bee_interval(k)
    if d <= k0:
        # the d-interval is empty: the whole coexistence interval is
        # replica symmetric
        return IntervalUnion(((iv.T1, iv.T2, True, True),))
    ivd = bee_interval(d)
    return IntervalUnion(
        (
            (iv.T1, ivd.T1, True, False),
            (ivd.T2, iv.T2, False, True),
        )
    )


def replica_symmetric_bee_region(subgraph) -> IntervalUnion:
    """Part of the coexistence interval where the conditioned graph is known
    to be replica symmetric, for a subgraph with k edges and max degree d.

    Empty when k is below the pivot or the subgraph is a star (d = k);
    the whole interval when d is below the pivot; otherwise the union
    (T1(k), T1(d)] u [T2(d), T2(k)).
    """
    return _rs_region(float(subgraph.k), float(subgraph.d))


class Regime(Enum):
    EQUIVALENT = "equivalent"
    BEE_REPLICA_SYMMETRIC = "bee_replica_symmetric"
    BEE_RS_UNKNOWN = "bee_rs_unknown"


def _classify(t_star: float, k: float, d: float) -> Regime:
    floor = 0.5**k
    if not floor <= t_star < 1.0:
        raise DomainError(f"T* must lie in [(1/2)**k, 1), got {t_star} for k={k}")
    k0, _ = solve_k0_T0()
    if k <= k0 or not bee_interval(k).contains(t_star):
        return Regime.EQUIVALENT
    if t_star in _rs_region(k, d):
        return Regime.BEE_REPLICA_SYMMETRIC
    return Regime.BEE_RS_UNKNOWN


def s_infinity(t_star: float, k: float, d: float) -> float | None:
    """Specific relative entropy of the hard- versus soft-constrained
    ensemble in the n -> infinity limit.

    Zero in the equivalence region.  In the replica-symmetric part of the
    coexistence interval it equals

        theta_hat(k) * (Ti - T*) + J_k(T*) - J_k(Ti),

    with Ti the boundary point on T*'s side of the interval (the two
    choices agree because the boundary values tie); strictly positive
    there.  Returns None where replica symmetry is unresolved (d close to
    k) since no closed form is known.
    """
    regime = _classify(t_star, k, d)
    if regime is Regime.EQUIVALENT:
        return 0.0
    if regime is Regime.BEE_RS_UNKNOWN:
        return None
    iv = bee_interval(k)
    # branch by which side of the interval T* lies on; the choice is
    # cosmetic since theta_hat*T - J_k(T) ties at both boundary points
    ti = iv.T1 if t_star - iv.T1 <= iv.T2 - t_star else iv.T2
    return iv.theta_hat * (ti - t_star) + float(j_value(t_star, k) - j_value(ti, k))


def delta_infinity(t_star: float, k: float, d: float) -> float | None:
    """Limiting per-vertex gap between the soft- and hard-ensemble averages
    of the largest adjacency eigenvalue.

    Zero in the equivalence region; in the replica-symmetric part of the
    coexistence interval it is the chord of x -> x**(1/k) through the
    interval endpoints minus the function itself, hence strictly negative
    (the hard ensemble has the larger eigenvalue).  None where replica
    symmetry is unresolved.
    """
    regime = _classify(t_star, k, d)
    if regime is Regime.EQUIVALENT:
        return 0.0
    if regime is Regime.BEE_RS_UNKNOWN:
        return None
    iv = bee_interval(k)
    u1 = iv.T1 ** (1.0 / k)
    u2 = iv.T2 ** (1.0 / k)
    chord = (u1 * (iv.T2 - t_star) + u2 * (t_star - iv.T1)) / (iv.T2 - iv.T1)
    return chord - t_star ** (1.0 / k)


@dataclass(frozen=True)
class RegimeReport:
    """Classification of a constraint value plus the quantities defined there."""

    t_star: float
    k: float
    d: float
    regime: Regime
    theta_star: float
    s_inf: float | None
    delta_inf: float | None


def regime_report(t_star: float, k: float, d: float) -> RegimeReport:
    """Classify T* and bundle the coupling, entropy and eigenvalue gap."""
    regime = _classify(t_star, k, d)
    theta = lagrange_multiplier(t_star, k)
    return RegimeReport(
        t_star,
        k,
        d,
        regime,
        theta,
        s_infinity(t_star, k, d),
        delta_infinity(t_star, k, d),
    )


def eigenvalue_curves(k: float, d: float, t_grid) -> list[dict]:
    """Limiting scaled largest-eigenvalue averages along a grid of
    constraint values.

    The soft-constraint (canonical) curve interpolates affinely between
    (T1, T1**(1/k)) and (T2, T2**(1/k)) across the coexistence interval
    and equals T***(1/k) outside it.  The hard-constraint (microcanonical)
    curve is T***(1/k) wherever replica symmetry is known and None where
    it is not.  Rows are dicts keyed T_star / lambda_mic / lambda_can /
    s_inf / delta_inf / regime.
    """
    iv = bee_interval(k)
    rows = []
    for t_star in np.asarray(t_grid, dtype=float).tolist():
        regime = _classify(t_star, k, d)
        root = t_star ** (1.0 / k)
        if iv.contains(t_star):
            u1 = iv.T1 ** (1.0 / k)
            u2 = iv.T2 ** (1.0 / k)
            lam_can = (u1 * (iv.T2 - t_star) + u2 * (t_star - iv.T1)) / (iv.T2 - iv.T1)
        else:
            lam_can = root
        lam_mic = None if regime is Regime.BEE_RS_UNKNOWN else root
        rows.append(
            {
                "T_star": t_star,
                "lambda_mic": lam_mic,
                "lambda_can": lam_can,
                "s_inf": s_infinity(t_star, k, d),
                "delta_inf": delta_infinity(t_star, k, d),
                "regime": regime.value,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# boundary expansion coefficients and far-boundary scaling diagnostics


def entropy_expansion_coefficient(t_star: float, k: float) -> float:
    """Curvature coefficient C(T*, k) of the entropy near a boundary point:
    the second derivative of J_k,

        (T***((1-2k)/k) / 2k) * [ (1/k)(1 + u/(1-u)) + (1/k - 1) log(u/(1-u)) ]

    at u = T***(1/k).
    """
    u = t_star ** (1.0 / k)
    return (
        t_star ** ((1.0 - 2.0 * k) / k)
        / (2.0 * k)
        * ((1.0 / k) * (1.0 + u / (1.0 - u)) + (1.0 / k - 1.0) * math.log(u / (1.0 - u)))
    )


def gap_expansion_coefficient(k: float) -> float:
    """Slope of the eigenvalue gap at the lower boundary T1(k):

        (T2**(1/k) - T1**(1/k)) / (T2 - T1) - (1/k) T1**((1-k)/k).
    """
    iv = bee_interval(k)
    return (iv.T2 ** (1.0 / k) - iv.T1 ** (1.0 / k)) / (iv.T2 - iv.T1) - (
        1.0 / k
    ) * iv.T1 ** ((1.0 - k) / k)


def _theta_hat_highprec(k, dps: int = 40) -> tuple[mp.mpf, mp.mpf, mp.mpf]:
    """Tie coupling and tied maximisers in arbitrary precision.

    Used for edge counts so large that the upper maximiser sits within
    double-precision rounding distance of 1; Newton in u from asymptotic
    starting points, bisection in theta on the tie condition.
    """
    with mp.workdps(dps):
        k = mp.mpf(k)

        def entropy(u):
            return (u * mp.log(u) + (1 - u) * mp.log(1 - u)) / 2

        def value(u, theta):
            return theta * u**k - entropy(u)

        def deriv(u, theta):
            return theta * k * u ** (k - 1) - mp.log(u / (1 - u)) / 2

        def second(u, theta):
            return theta * k * (k - 1) * u ** (k - 2) - 1 / (2 * u * (1 - u))

        def refine(u, theta):
            for _ in range(100):
                step = deriv(u, theta) / second(u, theta)
                nxt = u - step
                if nxt <= 0:
                    nxt = u / 2
                if nxt >= 1:
                    nxt = (u + 1) / 2
                if abs(nxt - u) < mp.mpf(10) ** (-dps + 4):
                    return nxt
                u = nxt
            return u

        def tie_gap(theta):
            lower = refine(mp.mpf("0.5") + theta * k * mp.mpf("0.5") ** k, theta)
            upper = refine(1 - mp.e ** (-2 * theta * k), theta)
            return value(upper, theta) - value(lower, theta), lower, upper

        pk = mp.mpf("0.5") ** k
        lo = (mp.log(2) + mp.log(1 - 1 / k) + mp.log(1 / (k - 1)) / k) / (2 * (1 - pk))
        hi = mp.log(2) / (2 * (1 - pk * (1 + k)))
        if not (tie_gap(lo)[0] < 0 < tie_gap(hi)[0]):
            raise ConvergenceError(f"tie bracket failed at k={k}")
        for _ in range(int(3.5 * dps)):
            mid = (lo + hi) / 2
            if tie_gap(mid)[0] > 0:
                hi = mid
            else:
                lo = mid
        theta = (lo + hi) / 2
        _, u1, u2 = tie_gap(theta)
        return theta, u1, u2


def boundary_scaling_ratios(k_values, dps: int = 40) -> list[dict]:
    """Diagnostics for the far ends of the critical curve at large k.

    For each k, returns t1_ratio = T1(k) * 2**k (the lower boundary tracks
    (1/2)**k) and t2_ratio = k * (1/2)**k / (1 - T2(k)) (the upper boundary
    approaches 1 like k * (1/2)**k).  Both tend to 1 as k grows.  Computed
    in extended precision: at k ~ 40 the quantities involved are smaller
    than double-precision spacing.
    """
    rows = []
    for k in k_values:
        with mp.workdps(dps):
            theta, u1, u2 = _theta_hat_highprec(k, dps)
            kk = mp.mpf(k)
            t1_ratio = u1**kk * 2**kk
            one_minus_t2 = -mp.expm1(kk * mp.log1p(-(1 - u2)))
            t2_ratio = kk * mp.mpf("0.5") ** kk / one_minus_t2
            rows.append(
                {
                    "k": float(k),
                    "theta_hat": float(theta),
                    "t1_ratio": float(t1_ratio),
                    "t2_ratio": float(t2_ratio),
                }
            )
    return rows
