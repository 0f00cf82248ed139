"""Parameter objects and closed-form scaling laws for dilatively stable processes.

A process is (alpha, delta)-dilatively stable when rescaling time by T is the
same, in finite-dimensional law, as multiplying by T**(alpha - delta/2) and
taking the T**delta-th convolution power.  Everything here works through
cumulants: a convolution power multiplies every cumulant by its exponent, so
the cumulant of order n of X(t) is t**((alpha - delta/2) * n + delta) times the
one of X(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate, special

DEFAULT_PMAX = 8


class OrderOutOfRange(ValueError):
    pass


class UnsupportedCase(ValueError):
    pass


@dataclass(frozen=True)
class DilativeParams:
    """Scaling pair (alpha, delta); under stationary increments alpha is H."""

    alpha: float
    delta: float
    stationary_increments: bool = False

    @property
    def hurst(self) -> float:
        return self.alpha

    def violations(self) -> list[str]:
        return validate_params(self)

    def check(self) -> "DilativeParams":
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self


def validate_params(p: DilativeParams) -> list[str]:
    """Every violated parameter rule, as human-readable strings (empty = ok)."""
    out = []
    if not (math.isfinite(p.alpha) and math.isfinite(p.delta)):
        return ["alpha and delta must be finite"]
    if p.alpha <= 0:
        out.append(f"alpha > 0 required (got {p.alpha:g})")
    if p.delta > 2 * p.alpha:
        out.append(f"delta <= 2*alpha required ({p.delta:g} > {2 * p.alpha:g})")
    if p.stationary_increments:
        if not 0 < p.alpha <= 1:
            out.append(f"H in (0,1] required under stationary increments (got {p.alpha:g})")
        elif p.alpha == 1 and p.delta != 0:
            out.append(f"H=1 forces delta=0 (got delta={p.delta:g})")
    return out


@dataclass(frozen=True)
class CumulantVector:
    """Cumulants c_1..c_pmax of X(1); ``entries[n - 1]`` is the order-n cumulant."""

    entries: tuple[float, ...]

    def __post_init__(self):
        e = tuple(float(x) for x in self.entries)
        object.__setattr__(self, "entries", e)
        if len(e) < 2 or len(e) % 2:
            raise ValueError(f"p_max must be even and >= 2 (got {len(e)})")
        if e[0] != 0.0:
            raise ValueError("first cumulant must be 0 (zero-mean process)")
        if not e[1] > 0:
            raise ValueError("second cumulant must be positive")
        for n in range(2, len(e) + 1, 2):
            if e[n - 1] < 0:
                raise ValueError(f"even cumulant c_{n} must be >= 0 (got {e[n - 1]:g})")

    @classmethod
    def from_orders(cls, orders: dict[int, float], p_max: int = DEFAULT_PMAX) -> "CumulantVector":
        """Build from a sparse {order: value} mapping; missing orders are zero."""
        hi = max([p_max, *orders])
        hi += hi % 2
        return cls(tuple(float(orders.get(n, 0.0)) for n in range(1, hi + 1)))

    @classmethod
    def gaussian(cls, var: float, p_max: int = DEFAULT_PMAX) -> "CumulantVector":
        return cls.from_orders({2: var}, p_max)

    @property
    def p_max(self) -> int:
        return len(self.entries)

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= self.p_max:
            raise OrderOutOfRange(f"cumulant order {n} outside 1..{self.p_max}")
        return self.entries[n - 1]

    def scaled(self, c: float) -> "CumulantVector":
        """Cumulants of the c-th convolution power."""
        return CumulantVector(tuple(c * x for x in self.entries))


class Kind(str, Enum):
    FBM = "fbm"
    FLP = "flp"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class ProcessSpec:
    """A concrete process: what to simulate plus its analytic description.

    ``dilatively_stable`` records whether the law qualifies (the FBM baseline
    is Gaussian and so only self-similar); it is metadata and is not checked.
    """

    kind: Kind
    params: DilativeParams
    cumulants: CumulantVector | None = None
    levy: object | None = None  # simulate.LevySpec for FLP
    function: str | None = None  # deterministic path name
    beta: float = 1.0
    dilatively_stable: bool = False

    @property
    def hurst(self) -> float:
        return self.params.alpha

    @classmethod
    def fbm(cls, hurst: float, var1: float = 1.0, p_max: int = DEFAULT_PMAX) -> "ProcessSpec":
        params = DilativeParams(hurst, 0.0, True).check()
        return cls(Kind.FBM, params, CumulantVector.gaussian(var1, p_max))

    @classmethod
    def flp(cls, hurst: float, levy, p_max: int = DEFAULT_PMAX) -> "ProcessSpec":
        if not 0.5 < hurst < 1:
            raise ValueError(f"FLP needs H in (1/2,1) (got {hurst:g})")
        if not levy.non_gaussian:
            raise ValueError("FLP driver must have a jump component")
        params = DilativeParams(hurst, 1.0, True).check()
        lc = levy.cumulants(p_max)
        cums = CumulantVector(
            tuple(lc[n] * flp_kernel_integral(hurst, n) for n in range(1, lc.p_max + 1))
        )
        return cls(Kind.FLP, params, cums, levy=levy, dilatively_stable=True)

    @classmethod
    def deterministic(cls, name: str, beta: float = 1.0) -> "ProcessSpec":
        alpha = {"identity": 1.0, "power": beta, "zero": 1.0}[name]
        return cls(Kind.DETERMINISTIC, DilativeParams(alpha, 0.0, False), function=name, beta=beta)


def scaling_exponent(p: DilativeParams, n: int) -> float:
    """Exponent of t in the order-n cumulant of X(t)."""
    return (p.alpha - p.delta / 2) * n + p.delta


def cumulant_at(p: DilativeParams, c1: CumulantVector, n: int, t: float) -> float:
    """Order-n cumulant of X(t) given the cumulants of X(1)."""
    if n < 2:
        raise OrderOutOfRange(f"order must be >= 2 (got {n})")
    if n > c1.p_max:
        raise OrderOutOfRange(f"order {n} exceeds p_max={c1.p_max}")
    if not t > 0:
        raise ValueError("t must be positive")
    e = scaling_exponent(p, n)
    if abs(math.log10(t)) > 6:
        # log-space to dodge intermediate overflow; inf/0 on true overflow
        try:
            return c1[n] * math.exp(e * math.log(t))
        except OverflowError:
            return math.copysign(math.inf, c1[n]) if c1[n] else 0.0
    return c1[n] * t**e


def fbm_covariance(H: float, var1: float, t1, t2):
    """Covariance shared by every stationary-increment process with index H."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    h2 = 2 * H
    out = 0.5 * var1 * (t1**h2 + t2**h2 - np.abs(t1 - t2) ** h2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HolderCase:
    case: str  # "I", "II" or "III"
    bound: float


def holder_case(p: DilativeParams) -> HolderCase:
    """Which of the three Hoelder regimes applies, with the guaranteed order."""
    if not p.stationary_increments:
        raise UnsupportedCase("Hoelder classification needs stationary increments")
    H, d = p.alpha, p.delta
    if d < 0:
        return HolderCase("I", H)
    if d < 2 * H:
        return HolderCase("II", H - d / 2)
    if d == 2 * H and H > 0.5:
        return HolderCase("III", H - 0.5)
    raise UnsupportedCase(f"delta=2H with H<=1/2 (H={H:g}, delta={d:g}) has no continuity guarantee")


def flp_kernel(H: float, t, s):
    """Moving-average kernel ((t-s)_+^d - (-s)_+^d) / Gamma(H + 1/2), d = H - 1/2.

    For s < 0 the difference is evaluated as (-s)^d * expm1(d*log1p(t/(-s)))
    which keeps full relative precision far in the past.
    """
    d = H - 0.5
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    t, s = np.broadcast_arrays(t, s)
    out = np.zeros(t.shape)
    past = s < 0
    if np.any(past):
        u = -s[past]
        out[past] = u**d * np.expm1(d * np.log1p(t[past] / u))
    mid = (s >= 0) & (s < t)
    out[mid] = (t[mid] - s[mid]) ** d
    out /= special.gamma(H + 0.5)
    return out if out.ndim else float(out)


def flp_kernel_integral(H: float, n: int, t: float = 1.0, lower: float = -np.inf, upper: float | None = None) -> float:
    """Quadrature value of the integral of f(t, s)**n over s in (lower, upper)."""
    if n == 1:
        # f is not integrable at -inf for n=1; the first cumulant is 0 anyway
        return 0.0
    upper = t if upper is None else min(upper, t)

    def g(s):
        return flp_kernel(H, t, s) ** n

    cuts = [lower] + [c for c in (-100 * t, -t, 0.0) if lower < c < upper] + [upper]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if a == -np.inf:
            # s = -1/u maps (-inf, b) onto (0, -1/b); integrand ~ u**(1-2H) at 0
            total += integrate.quad(lambda u: g(-1.0 / u) / u**2, 0.0, -1.0 / b,
                                    limit=400, epsabs=0, epsrel=1e-11)[0]
        else:
            total += integrate.quad(g, a, b, limit=400, epsabs=0, epsrel=1e-11)[0]
    return total


def flp_variance(H: float, c2_driver: float, t: float = 1.0) -> float:
    """Var X(t) of the FLP; the t**(2H) law is applied to the t=1 quadrature."""
    return c2_driver * flp_kernel_integral(H, 2) * t ** (2 * H)


def flp_truncation_deficit(H: float, window: float, t: float = 1.0) -> float:
    """Relative variance lost by cutting the moving-average integral at -window."""
    tail = flp_kernel_integral(H, 2, t, upper=-window)
    return tail / flp_kernel_integral(H, 2, t)


def gaussian_moment(p: int, var: float) -> float:
    """(p-1)!! var**(p/2) for even p."""
    return float(special.factorial2(p - 1, exact=True)) * var ** (p // 2)


def kernel_energy(H: float, t: float, s_points: Sequence[float], widths: Sequence[float], n: int = 2) -> float:
    """Riemann sum of f(t, s)**n with the given nodes and widths."""
    f = flp_kernel(H, t, np.asarray(s_points))
    return float(np.sum(f**n * np.asarray(widths)))


class SamplingMismatch(LookupError):
    """A requested time is not one of the path's sample times."""


@dataclass(frozen=True, eq=False)
class SamplePath:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape:
            raise ValueError("times and values must be 1-D and of equal length")
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise ValueError("times must be non-negative and strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    def __len__(self) -> int:
        return self.times.size

    @property
    def starts_at_zero(self) -> bool:
        return bool(self.times.size and self.times[0] == 0 and self.values[0] == 0)

    def index_of(self, t, rtol: float = 1e-12) -> np.ndarray:
        """Indices of the exact sample times ``t``; no interpolation."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.times, t), 0, self.times.size - 1)
        best = idx.copy()
        left = np.clip(idx - 1, 0, None)
        closer = np.abs(self.times[left] - t) < np.abs(self.times[idx] - t)
        best[closer] = left[closer]
        miss = np.abs(self.times[best] - t) > rtol * np.maximum(np.abs(t), 1e-3)
        if np.any(miss):
            bad = t[miss][:5]
            raise SamplingMismatch(
                f"{int(miss.sum())} requested time(s) not on the path grid, e.g. "
                + ", ".join(f"{v:.17g}" for v in bad)
            )
        return best

    def at(self, t) -> np.ndarray:
        return self.values[self.index_of(t)]

    def scaled(self, c: float) -> "SamplePath":
        return SamplePath(self.times, c * self.values)
