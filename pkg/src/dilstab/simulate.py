"""Path generators: fractional Brownian motion, fractional Levy processes and
their compound-Poisson / Gaussian drivers.

Every generator is a pure function of (parameters, grid, seed).  Path ``i`` of
a batch draws from ``path_rng(seed, i)``, so Monte Carlo output does not depend
on chunking or on how many worker threads are used.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy import linalg, signal
from scipy.sparse.linalg import LinearOperator, cg

from .model import CumulantVector, Kind, ProcessSpec, SamplePath, fbm_covariance, flp_kernel

CHOLESKY_MAX = 2**12
CIRCULANT_MAX = 2**16
CHUNK = 64
FINE_WINDOW_FACTOR = 50.0
WINDOW_FACTOR = 1e9
FAR_BLOCK_RATIO = 1.05
DENSE_LIMIT = 2**24


class GenerationError(RuntimeError):
    pass


class WindowError(ValueError):
    pass


# -- drivers ---------------------------------------------------------------


@dataclass(frozen=True)
class TwoPoint:
    """Jump of size ``a`` with probability ``prob``, else ``-b``."""

    a: float
    b: float
    prob: float = 0.5

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and 0 < self.prob < 1):
            raise ValueError("two-point jumps need a, b > 0 and prob in (0,1)")

    def moment(self, n: int) -> float:
        return self.prob * self.a**n + (1 - self.prob) * (-self.b) ** n

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        up = rng.binomial(counts, self.prob)
        return self.a * up - self.b * (counts - up)


@dataclass(frozen=True)
class CenteredExponential:
    """Exponential jumps of mean ``mu``; the process drift removes the mean."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("exponential jump mean must be positive")

    def moment(self, n: int) -> float:
        return math.factorial(n) * self.mu**n

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.gamma(counts, self.mu)


JumpLaw = Union[TwoPoint, CenteredExponential]


@dataclass(frozen=True)
class CompoundPoisson:
    rate: float
    jumps: JumpLaw

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("compound Poisson rate must be positive")


@dataclass(frozen=True)
class GaussianComponent:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class LevySpec:
    """Zero-mean Levy driver: compensated compound Poisson parts plus Brownian part."""

    components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("Levy spec needs at least one component")
        if self.cumulants(2)[2] <= 0:
            raise ValueError("Levy driver is degenerate (zero variance)")

    @property
    def non_gaussian(self) -> bool:
        return any(isinstance(c, CompoundPoisson) for c in self.components)

    @property
    def sigma(self) -> float:
        return math.sqrt(sum(c.sigma**2 for c in self.components if isinstance(c, GaussianComponent)))

    def cumulants(self, p_max: int = 8) -> CumulantVector:
        """Cumulants of L(1): rate * E[J**n] per jump part, plus sigma**2 at n=2."""
        out = [0.0] * p_max
        for c in self.components:
            if isinstance(c, CompoundPoisson):
                for n in range(2, p_max + 1):
                    out[n - 1] += c.rate * c.jumps.moment(n)
            else:
                out[1] += c.sigma**2
        return CumulantVector(tuple(out))

    def increments(self, lengths, rng: np.random.Generator) -> np.ndarray:
        """Independent increments over windows of the given lengths."""
        lengths = np.asarray(lengths, dtype=float)
        out = np.zeros(lengths.shape)
        for c in self.components:
            if isinstance(c, CompoundPoisson):
                counts = rng.poisson(c.rate * lengths)
                out += c.jumps.sample_sums(counts, rng) - c.rate * c.jumps.moment(1) * lengths
            elif c.sigma > 0:
                out += c.sigma * np.sqrt(lengths) * rng.standard_normal(lengths.shape)
        return out


def parse_levy(text: str) -> LevySpec:
    """Parse e.g. ``cpois:rate=5,jumps=cexp:mu=1+gauss:sigma=0.5``.

    Jump laws: ``cexp:mu=M`` and ``twopoint:a=A,b=B,p=P``.
    """
    comps = []
    for part in text.split("+"):
        part = part.strip()
        kind, _, body = part.partition(":")
        if kind == "gauss":
            kv = _kv(body)
            comps.append(GaussianComponent(float(kv["sigma"])))
        elif kind == "cpois":
            m = re.fullmatch(r"rate=([^,]+),jumps=(\w+):(.*)", body)
            if not m:
                raise ValueError(f"cannot parse compound Poisson spec {part!r}")
            rate, law, args = float(m.group(1)), m.group(2), _kv(m.group(3))
            if law == "cexp":
                jumps = CenteredExponential(float(args["mu"]))
            elif law == "twopoint":
                jumps = TwoPoint(float(args["a"]), float(args["b"]), float(args.get("p", 0.5)))
            else:
                raise ValueError(f"unknown jump law {law!r}")
            comps.append(CompoundPoisson(rate, jumps))
        else:
            raise ValueError(f"unknown Levy component {kind!r}")
    return LevySpec(tuple(comps))


def _kv(body: str) -> dict[str, str]:
    try:
        return dict(item.split("=", 1) for item in body.split(",") if item)
    except ValueError:
        raise ValueError(f"expected key=value pairs, got {body!r}") from None


# -- grids and seeds -------------------------------------------------------


def path_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for path ``index`` under master ``seed`` (SeedSequence mixing)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(int(index),)))


@dataclass(frozen=True)
class SimGrid:
    """Uniform grid k*T/n, optionally merged with (or replaced by) extra times.

    ``extra_times`` lets a path carry exact samples at geometric points;
    with ``include_uniform=False`` only 0 and the extra times are produced,
    while ``steps`` still sets the resolution of the FLP integration grid.
    """

    horizon: float
    steps: int
    seed: int = 0
    extra_times: tuple = ()
    include_uniform: bool = True

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        extra = tuple(float(t) for t in np.asarray(self.extra_times, dtype=float).ravel())
        if any(t < 0 or t > self.horizon * (1 + 1e-12) for t in extra):
            raise ValueError("extra times must lie in [0, horizon]")
        object.__setattr__(self, "extra_times", extra)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def uniform_times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return self._layout()[0]

    @property
    def is_uniform(self) -> bool:
        return self.include_uniform and self._layout()[1].size == 0

    def off_grid(self) -> np.ndarray:
        """Extra times that do not coincide with a uniform grid point."""
        return self._layout()[1]

    def _layout(self):
        return _grid_layout(self.horizon, self.steps, self.extra_times, self.include_uniform)

    def with_seed(self, seed: int) -> "SimGrid":
        return SimGrid(self.horizon, self.steps, seed, self.extra_times, self.include_uniform)


@lru_cache(maxsize=64)
def _grid_layout(T: float, n: int, extra: tuple, include_uniform: bool):
    uni = np.arange(n + 1) * T / n
    ex = np.unique(np.asarray(extra, dtype=float))
    tol = 1e-12 * T
    if ex.size:
        k = np.clip(np.rint(ex / (T / n)).astype(np.int64), 0, n)
        off = ex[np.abs(uni[k] - ex) > tol]
        on = uni[k][np.abs(uni[k] - ex) <= tol]
    else:
        off = on = ex
    base = uni if include_uniform else np.union1d([0.0], on)
    times = np.union1d(base, off)
    keep = np.concatenate([[True], np.diff(times) > tol])
    times = times[keep]
    times.setflags(write=False)
    off.setflags(write=False)
    return times, off


# -- Levy increments -------------------------------------------------------


def simulate_levy_increments(levy: LevySpec, dt: float, count: int, seed) -> np.ndarray:
    """``count`` i.i.d. zero-mean increments of the driver over windows of length dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed)
    return levy.increments(np.full(int(count), float(dt)), rng)


# -- fractional Brownian motion -------------------------------------------


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    """Autocovariance of unit-lag fractional Gaussian noise at lags 0..n."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _psd_factor(C: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.cholesky(C, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(C)
        if w[0] < -1e-10 * max(w[-1], 1e-300):
            raise GenerationError(
                f"{what}: covariance not positive semi-definite (min eigenvalue {w[0]:.3e}, max {w[-1]:.3e})"
            ) from None
        return V * np.sqrt(np.clip(w, 0, None))


@lru_cache(maxsize=4)
def _toeplitz_factor(H: float, n: int) -> np.ndarray:
    return _psd_factor(linalg.toeplitz(fgn_autocovariance(H, n - 1)), f"fGn n={n}")


@lru_cache(maxsize=8)
def _circulant_sqrt(H: float, n: int) -> np.ndarray:
    r = fgn_autocovariance(H, n)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise GenerationError(f"circulant embedding not PSD for H={H} n={n} (min eigenvalue {lam.min():.3e})")
    return np.sqrt(np.clip(lam, 0, None) / row.size)


@lru_cache(maxsize=4)
def _increment_factor(H: float, times_key: bytes) -> np.ndarray:
    t = np.frombuffer(times_key)
    a, b = t[:-1], t[1:]
    h2 = 2 * H
    C = 0.5 * (
        np.abs(b[:, None] - a[None, :]) ** h2
        + np.abs(a[:, None] - b[None, :]) ** h2
        - np.abs(b[:, None] - b[None, :]) ** h2
        - np.abs(a[:, None] - a[None, :]) ** h2
    )
    return _psd_factor(C, f"fBm increments on {t.size} points")


def _unit_fgn(H: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if n <= CHOLESKY_MAX:
        return _toeplitz_factor(H, n) @ rng.standard_normal(n)
    s = _circulant_sqrt(H, n)
    z = rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)
    return np.fft.fft(s * z).real[:n]


@lru_cache(maxsize=4)
def _conditioning(H: float, T: float, n: int, off_key: bytes):
    """Weights and residual factor for off-grid points given the uniform path."""
    g = np.frombuffer(off_key)
    dt = T / n
    t = np.arange(n + 1) * dt
    # Cov(increment_k, X(g_j)) with unit variance at time 1
    B = fbm_covariance(H, 1.0, t[1:, None], g[None, :]) - fbm_covariance(H, 1.0, t[:-1, None], g[None, :])
    scale = dt ** (2 * H)
    r = fgn_autocovariance(H, n)
    emb = np.fft.fft(np.concatenate([r, r[-2:0:-1]]))
    k = np.arange(n)
    chan = ((n - k) * r[:n] + k * np.concatenate([[0.0], r[n - 1 : 0 : -1]])) / n
    pre = np.fft.fft(chan).real

    def matvec(v):
        v = np.ravel(v)
        return np.fft.ifft(emb * np.fft.fft(v, 2 * n)).real[:n]

    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=lambda v: np.fft.ifft(np.fft.fft(np.ravel(v)) / pre).real, dtype=float)
    W = np.empty_like(B)
    for j in range(B.shape[1]):
        x, info = cg(A, B[:, j] / scale, rtol=1e-12, atol=0.0, maxiter=5000, M=M)
        if info != 0:
            raise GenerationError(f"conditioning solve did not converge (column {j}, info={info})")
        W[:, j] = x
    S = fbm_covariance(H, 1.0, g[:, None], g[None, :]) - B.T @ W
    S = 0.5 * (S + S.T)
    return W, _psd_factor(S + 1e-15 * np.eye(S.shape[0]) * max(np.max(np.diag(S)), 1e-300), "conditional fBm")


def _fbm_sampler(H: float, var1: float, grid: SimGrid) -> Callable[[np.random.Generator], np.ndarray]:
    if not 0 < H < 1:
        raise ValueError(f"H must lie in (0,1) (got {H:g})")
    if not var1 > 0:
        raise ValueError("var1 must be positive")
    times = grid.times
    sd = math.sqrt(var1)
    if grid.is_uniform:
        n = grid.steps
        if n > CIRCULANT_MAX:
            raise ValueError(f"steps must be <= {CIRCULANT_MAX}")
        step_sd = sd * grid.dt**H

        def draw(rng):
            return np.concatenate([[0.0], np.cumsum(step_sd * _unit_fgn(H, n, rng))])

        return draw
    if times.size - 1 <= CHOLESKY_MAX:
        L = _increment_factor(H, times.tobytes())

        def draw(rng):
            return np.concatenate([[0.0], np.cumsum(sd * (L @ rng.standard_normal(L.shape[1])))])

        return draw
    if not grid.include_uniform or grid.steps > CIRCULANT_MAX:
        raise ValueError(f"too many sample points for exact fBm ({times.size})")
    off = grid.off_grid()
    n = grid.steps
    W, R = _conditioning(H, grid.horizon, n, off.tobytes())
    uni = grid.uniform_times
    pos_uni = np.searchsorted(times, uni)
    pos_off = np.searchsorted(times, off)
    step_sd = grid.dt**H

    def draw(rng):
        y = step_sd * _unit_fgn(H, n, rng)
        xg = W.T @ y + R @ rng.standard_normal(R.shape[1])
        out = np.empty(times.size)
        out[pos_uni] = np.concatenate([[0.0], np.cumsum(y)])
        out[pos_off] = xg
        return sd * out

    return draw


def simulate_fbm(H: float, var1: float, grid: SimGrid, index: int = 0) -> SamplePath:
    """Exact fBm sample on ``grid.times``.

    Uniform grids use a Cholesky factor of the fGn covariance up to 2**12 steps
    and circulant embedding beyond.  Off-grid points are handled by Cholesky on
    all increments when that is small enough, otherwise by exact Gaussian
    conditioning on the uniform path (preconditioned CG on the Toeplitz system).
    """
    draw = _fbm_sampler(H, var1, grid)
    return SamplePath(grid.times, draw(path_rng(grid.seed, index)))


# -- fractional Levy process -----------------------------------------------


@dataclass(frozen=True)
class FlpLayout:
    """Integration nodes for the moving average: uniform fine part plus far blocks."""

    s_fine: np.ndarray
    s_far: np.ndarray
    far_lengths: np.ndarray
    dt: float
    offset: int  # number of fine nodes left of 0
    window: float


def flp_layout(grid: SimGrid, window: float | None = None, fine_window: float | None = None) -> FlpLayout:
    """Left-point nodes on [-fine_window, T] with the grid step, then geometric
    blocks (ratio 1.05) out to -window, each evaluated at its geometric centre."""
    T, dt = grid.horizon, grid.dt
    window = WINDOW_FACTOR * T if window is None else float(window)
    if window < T:
        raise WindowError(f"window ({window:g}) must be >= horizon ({T:g})")
    fine = min(window, FINE_WINDOW_FACTOR * T if fine_window is None else float(fine_window))
    J0 = int(math.ceil(fine / dt - 1e-9))
    s_fine = (np.arange(J0 + grid.steps) - J0) * dt
    edges = [J0 * dt]
    while edges[-1] < window * (1 - 1e-12):
        edges.append(min(edges[-1] * FAR_BLOCK_RATIO, window))
    e = np.asarray(edges)
    return FlpLayout(s_fine, -np.sqrt(e[:-1] * e[1:]), np.diff(e), dt, J0, window)


def _flp_sampler(H: float, levy: LevySpec, grid: SimGrid, window=None, fine_window=None):
    if not 0.5 < H < 1:
        raise ValueError(f"FLP needs H in (1/2,1) (got {H:g})")
    lay = flp_layout(grid, window, fine_window)
    times = grid.times
    J = lay.s_fine.size
    far = flp_kernel(H, times[:, None], lay.s_far[None, :])
    fine_len = np.full(J, lay.dt)
    if times.size * J <= DENSE_LIMIT:
        dense = flp_kernel(H, times[:, None], lay.s_fine[None, :])

        def draw(rng):
            dl = levy.increments(fine_len, rng)
            return dense @ dl + far @ levy.increments(lay.far_lengths, rng)

        return draw, dense, far

    n = grid.steps
    lag = np.arange(lay.offset + n + 1) * lay.dt
    gl = flp_kernel(H, lag, 0.0)  # g(m*dt), zero at m=0
    uni_pos = np.searchsorted(times, grid.uniform_times) if grid.include_uniform else None
    off = grid.off_grid() if grid.include_uniform else times[1:]
    off_pos = np.searchsorted(times, off)

    def draw(rng):
        dl = levy.increments(fine_len, rng)
        out = np.empty(times.size)
        if uni_pos is not None:
            y = signal.fftconvolve(dl, gl)[lay.offset : lay.offset + n + 1]
            out[uni_pos] = y - y[0]
        else:
            out[0] = 0.0
        for a in range(0, off.size, 256):
            rows = flp_kernel(H, off[a : a + 256, None], lay.s_fine[None, :])
            out[off_pos[a : a + 256]] = rows @ dl
        out += far @ levy.increments(lay.far_lengths, rng)
        out[times == 0] = 0.0
        return out

    return draw, None, far


def simulate_flp(H: float, levy: LevySpec, grid: SimGrid, window: float | None = None,
                 fine_window: float | None = None, index: int = 0) -> SamplePath:
    """Moving-average FLP X(t) = sum_j f(t, s_j) dL_j on ``grid.times``.

    f(t,s) = ((t-s)_+^(H-1/2) - (-s)_+^(H-1/2)) / Gamma(H+1/2).  The driver
    increments dL_j are exact Levy increments over the integration cells.
    """
    draw = _flp_sampler(H, levy, grid, window, fine_window)[0]
    return SamplePath(grid.times, draw(path_rng(grid.seed, index)))


def discrete_kernel_energy(H: float, grid: SimGrid, t: float, n: int = 2, window=None, fine_window=None) -> float:
    """Sum of f(t, s)**n times cell length over the simulator's integration cells.

    Multiplied by the driver's order-n cumulant this is the order-n cumulant
    of the simulated X(t), so it isolates discretisation error from noise.
    """
    lay = flp_layout(grid, window, fine_window)
    fine = flp_kernel(H, t, lay.s_fine)
    far = flp_kernel(H, t, lay.s_far)
    return float(np.sum(fine**n) * lay.dt + np.sum(far**n * lay.far_lengths))


# -- deterministic paths ---------------------------------------------------


def deterministic_path(name: str, grid: SimGrid, beta: float = 1.0) -> SamplePath:
    t = grid.times
    if name == "identity":
        x = t.copy()
    elif name == "power":
        if not beta > 0:
            raise ValueError("power exponent must be positive")
        x = t**beta
    elif name == "zero":
        x = np.zeros_like(t)
    else:
        raise ValueError(f"unknown deterministic path {name!r}")
    return SamplePath(t, x)


# -- batches ---------------------------------------------------------------


def path_sampler(spec: ProcessSpec, grid: SimGrid, **flp_opts) -> Callable[[np.random.Generator], np.ndarray]:
    """Single-path draw function for ``spec`` on ``grid`` (rng -> values)."""
    if spec.kind is Kind.FBM:
        return _fbm_sampler(spec.hurst, spec.cumulants[2], grid)
    if spec.kind is Kind.FLP:
        return _flp_sampler(spec.hurst, spec.levy, grid, **flp_opts)[0]
    path = deterministic_path(spec.function, grid, spec.beta)
    return lambda rng: path.values.copy()


def sample_paths(spec: ProcessSpec, grid: SimGrid, paths: int, workers: int = 1,
                 sampler: Callable | None = None, **flp_opts) -> np.ndarray:
    """Matrix of ``paths`` sample paths (rows) on ``grid.times``.

    Row i always comes from ``path_rng(grid.seed, i)``; work is split into
    fixed chunks so the result is the same for any ``workers``.
    """
    draw = sampler or path_sampler(spec, grid, **flp_opts)
    out = np.empty((paths, grid.times.size))

    def run(start):
        for i in range(start, min(start + CHUNK, paths)):
            out[i] = draw(path_rng(grid.seed, i))

    starts = range(0, paths, CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out
