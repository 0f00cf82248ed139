"""Finite-sample versions of the limsup dichotomy along geometric sequences.

Along t_n = t0 + r**n the ratio |X(t_n) - X(t0)| / |t_n - t0|**kappa tends to
0 when kappa is below the scaling exponent and to infinity above it.  Here the
limit is judged from the trend of log R_n over the tail of the sequence, and
optionally pooled over several anchors t0 (stationary increments make every
anchor equally informative).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

from .model import SamplePath

TINY = np.finfo(float).tiny


class Direction(str, Enum):
    TO_ANCHOR = "anchor"
    TO_ZERO = "zero"
    TO_INFINITY = "infinity"


class Verdict(str, Enum):
    VANISHES = "vanishes"
    DIVERGES = "diverges"
    INDETERMINATE = "indeterminate"


class Label(str, Enum):
    FIRST = "first"  # the smaller of the two hypothesised exponents
    SECOND = "second"
    UNDECIDED = "undecided"


class BracketFailure(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class GeometricGrid:
    """t_n = t0 + r**n (towards the anchor or zero) or t_n = r**-n, n = 1..count."""

    anchor: float = 0.0
    ratio: float = 0.5
    count: int = 16
    direction: Direction = Direction.TO_ANCHOR

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0,1)")
        if self.count < 4:
            raise ValueError("count must be >= 4")
        if self.anchor < 0:
            raise ValueError("anchor must be >= 0")
        if self.direction is not Direction.TO_ANCHOR:
            object.__setattr__(self, "anchor", 0.0)

    @classmethod
    def fitted(cls, anchor: float, ratio: float, resolution: float, **kw) -> "GeometricGrid":
        """Longest sequence whose smallest offset r**N is still >= ``resolution``."""
        count = int(math.floor(math.log(resolution) / math.log(ratio) + 1e-9))
        return cls(anchor, ratio, count, **kw)

    @property
    def lags(self) -> np.ndarray:
        n = np.arange(1, self.count + 1)
        return self.ratio ** (-n) if self.direction is Direction.TO_INFINITY else self.ratio**n

    def times(self) -> np.ndarray:
        return self.anchor + self.lags

    @property
    def below_vanishes(self) -> bool:
        """True when Vanishes means kappa < exponent (sequences shrinking to t0)."""
        return self.direction is not Direction.TO_INFINITY


def build_sequence(g: GeometricGrid) -> list[float]:
    return g.times().tolist()


Grids = Union[GeometricGrid, Sequence[GeometricGrid]]


def _as_list(grids: Grids) -> list[GeometricGrid]:
    return [grids] if isinstance(grids, GeometricGrid) else list(grids)


def anchor_fan(anchors: Iterable[float], ratio: float, count: int) -> list[GeometricGrid]:
    """The same geometric sequence hung from several anchors."""
    return [GeometricGrid(float(a), ratio, count) for a in anchors]


def design_times(grids: Grids) -> np.ndarray:
    """Every time a path must contain for the statistics on ``grids``."""
    gs = _as_list(grids)
    return np.unique(np.concatenate([[g.anchor for g in gs]] + [g.times() for g in gs]))


@dataclass(frozen=True)
class DichotomyRule:
    """Trend rule: slope of log R_n over the last ``window`` terms, as a per-step factor.

    The defaults only leave out trends that are flat to rounding, so a path
    t**beta is decided for every kappa != beta.
    """

    window: int = 14
    diverge_threshold: float = math.exp(1e-9)
    vanish_threshold: float = math.exp(-1e-9)

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not self.vanish_threshold < 1 < self.diverge_threshold:
            raise ValueError("need vanish_threshold < 1 < diverge_threshold")


def ratio_statistics(path: SamplePath, grids: Grids, kappa: float) -> np.ndarray:
    """R_n = |X(t_n) - X(t0)| / |t_n - t0|**kappa; one row per grid when given several."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    gs = _as_list(grids)
    rows = []
    for g in gs:
        i0 = path.index_of(g.anchor)[0]
        idx = path.index_of(g.times())
        lag = np.abs(path.times[idx] - path.times[i0])
        rows.append(np.abs(path.values[idx] - path.values[i0]) / lag**kappa)
    R = np.vstack(rows)
    return R[0] if isinstance(grids, GeometricGrid) else R


def trend_factor(R, window: int) -> float:
    """exp of the least-squares slope of mean log R_n against n over the tail."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] < window:
        raise ValueError(f"need at least {window} terms (got {R.shape[1]})")
    y = np.log(np.maximum(R[:, -window:], TINY)).mean(axis=0)
    n = np.arange(window, dtype=float)
    n -= n.mean()
    return math.exp(float(n @ (y - y.mean())) / float(n @ n))


def classify_dichotomy(R, rule: DichotomyRule = DichotomyRule()) -> Verdict:
    g = trend_factor(R, rule.window)
    if g >= rule.diverge_threshold:
        return Verdict.DIVERGES
    if g <= rule.vanish_threshold:
        return Verdict.VANISHES
    return Verdict.INDETERMINATE


def default_kappa_grid(step: float = 0.05, top: float = 1.5) -> np.ndarray:
    k = np.arange(1, int(round(top / step)) + 1) * step
    return np.round(k, 12)


@dataclass
class AlphaEstimate:
    estimate: float
    lower: float
    upper: float
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "bracket": [self.lower, self.upper],
            "trace": [{"kappa": k, "verdict": v.value} for k, v in self.trace],
        }


def estimate_alpha(path: SamplePath, grids: Grids, kappa_grid=None,
                   rule: DichotomyRule = DichotomyRule()) -> AlphaEstimate:
    """Midpoint between the largest kappa judged below the exponent and the
    smallest judged above it."""
    gs = _as_list(grids)
    if len({g.below_vanishes for g in gs}) != 1:
        raise ValueError("all grids must share a direction")
    below_vanishes = gs[0].below_vanishes
    ks = default_kappa_grid() if kappa_grid is None else np.asarray(kappa_grid, dtype=float)
    trace, below, above = [], [], []
    for k in ks:
        v = classify_dichotomy(ratio_statistics(path, gs, float(k)), rule)
        trace.append((float(k), v))
        if v is Verdict.INDETERMINATE:
            continue
        ((below if (v is Verdict.VANISHES) == below_vanishes else above)).append(float(k))
    if not below or not above:
        raise BracketFailure("no transition between vanishing and diverging ratios on the kappa grid", trace)
    lo, hi = max(below), min(above)
    return AlphaEstimate(0.5 * (lo + hi), lo, hi, trace)


@dataclass
class HolderEstimate:
    estimate: float
    constant: bool
    levels: list
    sizes: list

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "constant_path": self.constant,
                "levels": self.levels, "increment_sizes": self.sizes}


def uniform_subpath(path: SamplePath) -> SamplePath:
    """The uniform k*T/n part of a path that may carry extra off-grid samples."""
    d = np.diff(path.times)
    dt = float(np.median(d))
    T = path.times[-1]
    n = int(round((T - path.times[0]) / dt))
    k = (path.times - path.times[0]) / dt
    keep = np.abs(k - np.rint(k)) <= 1e-9 * max(n, 1)
    if keep.sum() != n + 1:
        raise ValueError("path has no uniform sub-grid")
    return SamplePath(path.times[keep], path.values[keep])


def estimate_holder_exponent(path: SamplePath, levels: Sequence[int] | None = None,
                             quantile: float = 0.9) -> HolderEstimate:
    """Slope of log S_j on log h_j for dyadic lags h_j = T 2**-j.

    S_j is the ``quantile`` of |X(t + h_j) - X(t)| over the grid; quantile=1
    gives the plain maximum, whose slope carries the sqrt(log(1/h)) factor of
    the modulus of continuity and reads low.
    """
    p = uniform_subpath(path)
    n = p.times.size - 1
    if levels is None:
        top = (n & -n).bit_length() - 1  # 2**top divides n
        if top < 3:
            raise ValueError("need a grid with at least 2**3 | steps for default levels")
        levels = list(range(max(1, top - 7), top))
    levels = [int(j) for j in levels]
    T = p.times[-1] - p.times[0]
    hs, S = [], []
    for j in levels:
        if n % 2**j:
            raise ValueError(f"level {j} is not a whole number of grid steps (n={n})")
        lag = n // 2**j
        d = np.abs(p.values[lag:] - p.values[:-lag])
        hs.append(T / 2**j)
        S.append(float(np.quantile(d, quantile)))
    hs, S = np.asarray(hs), np.asarray(S)
    ok = S > 0
    if ok.sum() < 2:
        return HolderEstimate(math.nan, True, levels, S.tolist())
    slope = np.polyfit(np.log(hs[ok]), np.log(S[ok]), 1)[0]
    return HolderEstimate(float(slope), False, levels, S.tolist())


def discriminate(path: SamplePath, grids: Grids, H1: float, H2: float,
                 rule: DichotomyRule = DichotomyRule()) -> Label:
    """Decide between two exponents with one dichotomy test at their midpoint.

    FIRST always names the smaller exponent, so swapping the arguments does
    not change the answer.
    """
    lo, hi = sorted((H1, H2))
    gs = _as_list(grids)
    v = classify_dichotomy(ratio_statistics(path, gs, 0.5 * (lo + hi)), rule)
    if v is Verdict.INDETERMINATE:
        return Label.UNDECIDED
    above_mid = (v is Verdict.VANISHES) == gs[0].below_vanishes
    return Label.SECOND if above_mid else Label.FIRST
