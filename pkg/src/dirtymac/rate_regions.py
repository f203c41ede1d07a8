"""Closed-form sum-rate expressions, regime dispatch and rate-region geometry.

All rates are in bits per channel use. Partial side information enters only
through the aggregate ``residual = e1 + e2 + noise``; the interference power is
carried on :class:`ChannelParams` for the simulator and never read here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

#: Relative tolerance used to decide P1 == P2.
BALANCE_RTOL = 1e-9


class Regime(str, Enum):
    IMBALANCED = "Imbalanced"
    NEARLY_BALANCED = "NearlyBalanced"
    EXACTLY_BALANCED = "ExactlyBalanced"


class RegimeError(ValueError):
    """Operation called outside the regime its formula is valid for."""

    def __init__(self, message, threshold):
        super().__init__(f"{message} (threshold sqrt(p1*p2) - min(p1, p2) = {threshold:.12g})")
        self.threshold = threshold


class ConditionError(ValueError):
    """Power relation required by a constructive case does not hold."""


@dataclass(frozen=True)
class ChannelParams:
    p1: float
    p2: float
    noise: float
    e1: float = 0.0
    e2: float = 0.0
    interference_power: float | None = None

    def __post_init__(self):
        for name in ("p1", "p2", "noise", "e1", "e2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        for name in ("p1", "p2", "noise"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("e1", "e2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if self.interference_power is None:
            object.__setattr__(self, "interference_power", 1e4 * max(self.p1, self.p2))
        elif not (math.isfinite(self.interference_power) and self.interference_power > 0):
            raise ValueError(f"interference_power must be positive, got {self.interference_power!r}")

    @property
    def residual(self) -> float:
        return self.e1 + self.e2 + self.noise

    def replace(self, **changes) -> "ChannelParams":
        return replace(self, **changes)

    def full_si(self) -> "ChannelParams":
        return replace(self, e1=0.0, e2=0.0)

    def swapped(self) -> "ChannelParams":
        return replace(self, p1=self.p2, p2=self.p1, e1=self.e2, e2=self.e1)


def residual(params: ChannelParams) -> float:
    return params.residual


def regime_threshold(p1: float, p2: float) -> float:
    return math.sqrt(p1 * p2) - min(p1, p2)


def _is_imbalanced(p1, p2, res):
    thr = regime_threshold(p1, p2)
    # boundary equality counts as imbalanced; slack absorbs sqrt rounding
    return res <= thr + 1e-12 * max(1.0, abs(thr))


def is_balanced(p1: float, p2: float) -> bool:
    return abs(p1 - p2) <= BALANCE_RTOL * max(p1, p2)


def _classify(p1, p2, res) -> Regime:
    if _is_imbalanced(p1, p2, res):
        return Regime.IMBALANCED
    if is_balanced(p1, p2):
        return Regime.EXACTLY_BALANCED
    return Regime.NEARLY_BALANCED


def classify_regime(params: ChannelParams) -> Regime:
    return _classify(params.p1, params.p2, params.residual)


# ---------------------------------------------------------------------------
# pointwise formulas

def imbalanced_formula(p1, p2, res):
    """``0.5*log2(1 + min(p1, p2)/res)`` without a regime check."""
    return 0.5 * math.log2(1.0 + min(p1, p2) / res)


def nearly_formula(p1, p2, res):
    """Clipped nearly-balanced expression without a regime check."""
    num = p1 + p2 + res
    den = 2.0 * res + (math.sqrt(p1) - math.sqrt(p2)) ** 2
    return max(0.0, 0.5 * math.log2(num / den))


def _require(params, allowed, what):
    regime = classify_regime(params)
    if regime not in allowed:
        raise RegimeError(f"{what} requires {'/'.join(r.value for r in allowed)}, "
                          f"got {regime.value}", regime_threshold(params.p1, params.p2))


def sum_rate_imbalanced(params: ChannelParams) -> float:
    _require(params, (Regime.IMBALANCED,), "sum_rate_imbalanced")
    return imbalanced_formula(params.p1, params.p2, params.residual)


def corner_condition_user1_helps(params: ChannelParams) -> bool:
    """``P1 >= P2*((P2 + res)/P2)**2`` (user 1 strong enough to help user 2)."""
    p1, p2, r = params.p1, params.p2, params.residual
    return p1 >= p2 * ((p2 + r) / p2) ** 2 * (1.0 - 1e-12)


def corner_condition_user2_helps(params: ChannelParams) -> bool:
    """``P2 >= P1*((P1 + res)/P1)**2``."""
    p1, p2, r = params.p1, params.p2, params.residual
    return p2 >= p1 * ((p1 + r) / p1) ** 2 * (1.0 - 1e-12)


def corner_points_imbalanced(params: ChannelParams):
    """Single-user corners ``((R1, 0), (0, R2))`` reached by the helper schemes.

    Both corners carry the same value; which power is used depends on which of
    the two helper conditions holds.
    """
    _require(params, (Regime.IMBALANCED,), "corner_points_imbalanced")
    r = params.residual
    if corner_condition_user2_helps(params):
        value = 0.5 * math.log2(1.0 + params.p1 / r)
    elif corner_condition_user1_helps(params):
        value = 0.5 * math.log2(1.0 + params.p2 / r)
    else:
        raise ConditionError(
            "neither P2 >= P1((P1+N+E1+E2)/P1)^2 nor P1 >= P2((P2+N+E1+E2)/P2)^2 holds")
    return (value, 0.0), (0.0, value)


def raw_sum_rate_balanced(p: float, residual: float) -> float:
    if p <= 0 or residual <= 0:
        raise ValueError("power and residual must be positive")
    return max(0.0, 0.5 * math.log2(0.5 + p / residual))


def raw_sum_rate_nearly(params: ChannelParams) -> float:
    _require(params, (Regime.NEARLY_BALANCED, Regime.EXACTLY_BALANCED), "raw_sum_rate_nearly")
    return nearly_formula(params.p1, params.p2, params.residual)


def gueguen_sayrac_capacity(px: float, d: float, n: float) -> float:
    """Point-to-point dirty-paper capacity with an interference estimate of distortion ``d``."""
    if px <= 0 or n <= 0 or d < 0:
        raise ValueError("need px > 0, n > 0, d >= 0")
    return 0.5 * math.log2(1.0 + px / (d + n))


# ---------------------------------------------------------------------------
# upper convex envelope

@dataclass(frozen=True)
class EnvelopePoint:
    x: float
    raw: float
    enveloped: float


def _upper_hull(x, y):
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def envelope_values(x, y):
    """Least concave majorant of the points ``(x, y)`` evaluated at every ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
        raise ValueError("need at least two samples as matching 1-d sequences")
    if not np.all(np.diff(x) > 0):
        raise ValueError("sample abscissae must be strictly increasing")
    hull = _upper_hull(x.tolist(), y.tolist())
    env = np.interp(x, x[hull], y[hull])
    return np.maximum(env, y)


def upper_convex_envelope(samples) -> list[EnvelopePoint]:
    """Upper convex envelope of a sampled graph ``[(x, f(x)), ...]``."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must be a sequence of (x, f(x)) pairs")
    env = envelope_values(arr[:, 0], arr[:, 1])
    return [EnvelopePoint(float(a), float(b), float(c)) for a, b, c in zip(arr[:, 0], arr[:, 1], env)]


@dataclass(frozen=True)
class PowerGrid:
    """Sampling of the power-scaling path ``t -> (t*P1, t*P2)``.

    ``span`` is the largest scale sampled; by default it reaches well past the
    point where the envelope rejoins the raw curve, so time sharing may use
    powers above nominal in one phase and below it in the other.
    """

    points: int = 1025
    spacing: str = "linear"
    span: float | None = None

    def __post_init__(self):
        if self.points < 16:
            raise ValueError(f"grid needs at least 16 points, got {self.points}")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"spacing must be 'linear' or 'log', got {self.spacing!r}")
        if self.span is not None and self.span < 1.0:
            raise ValueError("span must cover the nominal point (span >= 1)")

    def scales(self, zero_crossing: float) -> np.ndarray:
        span = self.span if self.span is not None else max(2.0, 10.0 * zero_crossing)
        if self.spacing == "linear":
            t = np.linspace(0.0, span, self.points)
        else:
            t = np.concatenate(([0.0], np.geomspace(span * 1e-6, span, self.points - 1)))
        return np.unique(np.append(t, 1.0))


DEFAULT_GRID = PowerGrid()


def _path_envelope(raw_at_scale, zero_crossing, grid, x_unit=1.0):
    t = grid.scales(zero_crossing)
    raw = np.array([raw_at_scale(s) if s > 0 else 0.0 for s in t])
    env = envelope_values(t, raw)
    k = int(np.searchsorted(t, 1.0))
    points = [EnvelopePoint(float(a * x_unit), float(b), float(c)) for a, b, c in zip(t, raw, env)]
    return points, float(env[k])


def sum_rate_exactly_balanced(p: float, residual: float, grid: PowerGrid | None = None):
    """Envelope of the clipped balanced expression along the power axis.

    Returns ``(points, value_at_p)``; point abscissae are powers.
    """
    grid = grid or DEFAULT_GRID
    if p <= 0 or residual <= 0:
        raise ValueError("power and residual must be positive")
    return _path_envelope(lambda s: raw_sum_rate_balanced(s * p, residual),
                          residual / (2.0 * p), grid, x_unit=p)


def _nearly_envelope(p1, p2, res, grid):
    if is_balanced(p1, p2):
        return sum_rate_exactly_balanced(p1, res, grid)
    return _path_envelope(lambda s: nearly_formula(s * p1, s * p2, res),
                          res / (2.0 * math.sqrt(p1 * p2)), grid)


def sum_rate_nearly_balanced(params: ChannelParams, grid: PowerGrid | None = None):
    """Envelope of the nearly-balanced expression along ``t -> (t*P1, t*P2)``.

    Returns ``(points, value_at_nominal)``; point abscissae are the scale ``t``
    (powers, when P1 == P2).
    """
    _require(params, (Regime.NEARLY_BALANCED, Regime.EXACTLY_BALANCED), "sum_rate_nearly_balanced")
    return _nearly_envelope(params.p1, params.p2, params.residual, grid or DEFAULT_GRID)


# Full side-information reference expressions, written directly in terms of N.

def exact_si_imbalanced(p1, p2, n):
    return 0.5 * math.log2(1.0 + min(p1, p2) / n)


def exact_si_nearly_raw(p1, p2, n):
    return max(0.0, 0.5 * math.log2((p1 + p2 + n) / (2.0 * n + (math.sqrt(p1) - math.sqrt(p2)) ** 2)))


def exact_si_balanced_raw(p, n):
    return max(0.0, 0.5 * math.log2(0.5 + p / n))


def baseline_full_si(params: ChannelParams, grid: PowerGrid | None = None) -> float:
    """Sum rate with exact side information (E1 = E2 = 0) at the same powers and noise."""
    grid = grid or DEFAULT_GRID
    p1, p2, n = params.p1, params.p2, params.noise
    regime = _classify(p1, p2, n)
    if regime is Regime.IMBALANCED:
        return exact_si_imbalanced(p1, p2, n)
    if regime is Regime.EXACTLY_BALANCED:
        return _path_envelope(lambda s: exact_si_balanced_raw(s * p1, n), n / (2.0 * p1), grid)[1]
    return _path_envelope(lambda s: exact_si_nearly_raw(s * p1, s * p2, n),
                          n / (2.0 * math.sqrt(p1 * p2)), grid)[1]


# ---------------------------------------------------------------------------
# MMSE scaling

MMSE_KINDS = ("ImbalancedUser2", "ImbalancedUser1", "Balanced", "GeneralNearly")


def _balanced_power(params):
    if not is_balanced(params.p1, params.p2):
        raise ValueError("Balanced kind needs p1 == p2")
    return params.p1


def mmse_alpha(kind: str, params: ChannelParams) -> float:
    r = params.residual
    if kind == "ImbalancedUser2":
        return params.p2 / (params.p2 + r)
    if kind == "ImbalancedUser1":
        return params.p1 / (params.p1 + r)
    if kind == "Balanced":
        p = _balanced_power(params)
        return 2.0 * p / (2.0 * p + r)
    if kind == "GeneralNearly":
        p1, p2 = params.p1, params.p2
        return math.sqrt(p1) * (math.sqrt(p1) + math.sqrt(p2)) / (p1 + p2 + r)
    raise ValueError(f"unknown MMSE kind {kind!r}; expected one of {MMSE_KINDS}")


def sinr_objective(kind: str, params: ChannelParams, alpha: float) -> float:
    """Signal power over effective-noise power as a function of the scaling factor."""
    r = params.residual
    a = alpha
    if kind == "ImbalancedUser2":
        p = params.p2
        return p / ((1 - a) ** 2 * p + a * a * r)
    if kind == "ImbalancedUser1":
        p = params.p1
        return p / ((1 - a) ** 2 * p + a * a * r)
    if kind == "Balanced":
        p = _balanced_power(params)
        return p / (2 * (1 - a) ** 2 * p + a * a * r)
    if kind == "GeneralNearly":
        p1, p2 = params.p1, params.p2
        return p1 / ((1 - a) ** 2 * p1 + (math.sqrt(p1) - a * math.sqrt(p2)) ** 2 + a * a * r)
    raise ValueError(f"unknown MMSE kind {kind!r}; expected one of {MMSE_KINDS}")


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class RateRegion:
    vertices: tuple
    regime: Regime
    sum_rate: float
    envelope: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def triangle(cls, c, regime, envelope=()):
        c = max(0.0, float(c))
        return cls(((0.0, 0.0), (c, 0.0), (0.0, c)), regime, c, tuple(envelope))


def sum_rate(params: ChannelParams, grid: PowerGrid | None = None) -> float:
    """Regime-dispatched (enveloped where applicable) partial-SI sum rate."""
    return region_boundary(params, grid).sum_rate


def region_boundary(params: ChannelParams, grid: PowerGrid | None = None) -> RateRegion:
    regime = classify_regime(params)
    if regime is Regime.IMBALANCED:
        return RateRegion.triangle(sum_rate_imbalanced(params), regime)
    if regime is Regime.EXACTLY_BALANCED:
        points, c = sum_rate_exactly_balanced(params.p1, params.residual, grid)
    else:
        points, c = sum_rate_nearly_balanced(params, grid)
    return RateRegion.triangle(c, regime, points)


def full_si_region(params: ChannelParams, grid: PowerGrid | None = None) -> RateRegion:
    full = params.full_si()
    return RateRegion.triangle(baseline_full_si(full, grid), classify_regime(full))


@dataclass(frozen=True)
class RegionComparison:
    a_in_b: bool
    b_in_a: bool
    gap: float  # sum_rate(b) - sum_rate(a)

    @property
    def relation(self) -> str:
        if self.a_in_b and self.b_in_a:
            return "equal"
        if self.a_in_b:
            return "a_subset_b"
        if self.b_in_a:
            return "b_subset_a"
        return "incomparable"


def _contains(outer, inner, tol):
    """Convex polygon ``outer`` contains every vertex of ``inner``."""
    v = np.asarray(outer.vertices, dtype=float)
    edges = np.roll(v, -1, axis=0) - v
    area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    if abs(area2) <= tol:
        # degenerate outer polygon: only the origin fits
        return all(abs(p[0]) <= tol and abs(p[1]) <= tol for p in inner.vertices)
    sign = 1.0 if area2 > 0 else -1.0
    for p in np.asarray(inner.vertices, dtype=float):
        cross = edges[:, 0] * (p[1] - v[:, 1]) - edges[:, 1] * (p[0] - v[:, 0])
        if np.any(sign * cross < -tol):
            return False
    return True


def compare_regions(a: RateRegion, b: RateRegion, tol: float = 1e-12) -> RegionComparison:
    return RegionComparison(_contains(b, a, tol), _contains(a, b, tol), b.sum_rate - a.sum_rate)
