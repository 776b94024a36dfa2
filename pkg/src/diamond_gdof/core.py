"""Shared numeric foundations.

Complex Gaussian sampling, chi-squared utilities, the exponential
integral, deterministic chunked random streams and the network
parameter types used by every other module.

All logarithms are base 2 unless a name says otherwise.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

EULER_GAMMA = 0.5772156649015329
LOG2E = 1.0 / math.log(2.0)

SeedLike = Union[int, np.random.Generator, None]


class DiamondError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DiamondError, ValueError):
    """An argument is outside its documented range."""


class DomainError(ParameterError):
    """A special function was evaluated outside its domain."""


class ContractError(DiamondError):
    """A documented precondition (regime, power budget, ...) does not hold."""


class SolverError(DiamondError):
    """A numerical solver could not produce an optimal answer."""


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkParams:
    """Coherence time, SNR exponents and (optionally) the SNR itself.

    Parameters
    ----------
    T : int
        Symbols per coherence block, ``T >= 1``.
    gamma_sr1, gamma_sr2, gamma_rd1, gamma_rd2 : float
        Nonnegative SNR exponents of the four links.
    snr : float, optional
        Linear SNR, must exceed 1 when given.
    """

    T: int
    gamma_sr1: float
    gamma_sr2: float
    gamma_rd1: float
    gamma_rd2: float
    snr: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise ParameterError(f"T must be a positive integer, got {self.T!r}")
        object.__setattr__(self, "T", int(self.T))
        for name in ("gamma_sr1", "gamma_sr2", "gamma_rd1", "gamma_rd2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be a finite nonnegative real, got {v!r}")
            object.__setattr__(self, name, v)
        if self.snr is not None:
            s = float(self.snr)
            if not math.isfinite(s) or s <= 1.0:
                raise ParameterError(f"snr must be > 1 when given, got {s!r}")
            object.__setattr__(self, "snr", s)

    @classmethod
    def from_gammas(cls, T: int, gammas: Sequence[float], snr: Optional[float] = None):
        """Build from a ``(sr1, sr2, rd1, rd2)`` sequence."""
        if len(gammas) != 4:
            raise ParameterError(f"expected 4 exponents, got {len(gammas)}")
        return cls(T, *gammas, snr=snr)

    @property
    def gammas(self) -> tuple:
        return (self.gamma_sr1, self.gamma_sr2, self.gamma_rd1, self.gamma_rd2)

    def swapped(self) -> "NetworkParams":
        """Exchange the relay labels (sr1<->sr2, rd1<->rd2)."""
        return NetworkParams(self.T, self.gamma_sr2, self.gamma_sr1,
                             self.gamma_rd2, self.gamma_rd1, snr=self.snr)

    def with_snr(self, snr: float) -> "NetworkParams":
        return NetworkParams(self.T, *self.gammas, snr=snr)

    def log2_snr(self) -> float:
        if self.snr is None:
            raise ParameterError("this operation needs a finite snr")
        return math.log2(self.snr)

    def link_strengths(self) -> "LinkStrengths":
        """Squared link strengths rho^2 = snr^gamma."""
        if self.snr is None:
            raise ParameterError("link strengths need a finite snr")
        s = self.snr
        return LinkStrengths(s ** self.gamma_sr1, s ** self.gamma_sr2,
                             s ** self.gamma_rd1, s ** self.gamma_rd2)

    def to_dict(self) -> dict:
        d = {"T": self.T, "gamma": list(self.gammas)}
        if self.snr is not None:
            d["snr"] = self.snr
        return d


@dataclass(frozen=True)
class LinkStrengths:
    """Squared link strengths ``rho^2`` of the four links (linear scale)."""

    rho_sr1_sq: float
    rho_sr2_sq: float
    rho_rd1_sq: float
    rho_rd2_sq: float

    def __post_init__(self):
        for name in ("rho_sr1_sq", "rho_sr2_sq", "rho_rd1_sq", "rho_rd2_sq"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class MassPointDistribution:
    """Finite law over relay power triples ``(|x_r2|^2, |x_r11|^2, |x_r12|^2)``.

    ``points`` is an ``(n, 3)`` array of triples ``(a2, b2, c2)`` and
    ``probs`` the matching probabilities.
    """

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pr = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if pts.shape[1] != 3 or pts.shape[0] != pr.shape[0]:
            raise ParameterError("points must be (n, 3) with one probability per point")
        if np.any(pts < 0) or not np.all(np.isfinite(pts)):
            raise ParameterError("mass-point coordinates must be finite and >= 0")
        if np.any(pr < -1e-12) or abs(pr.sum() - 1.0) > 1e-9:
            raise ParameterError(f"probabilities must be >= 0 and sum to 1 (sum={pr.sum()!r})")
        pr = np.clip(pr, 0.0, None)
        pts.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @classmethod
    def from_list(cls, items):
        """Build from ``[(a2, b2, c2, p), ...]``."""
        arr = np.asarray(items, dtype=float).reshape(-1, 4)
        return cls(arr[:, :3], arr[:, 3])

    def to_list(self) -> list:
        return [(*map(float, pt), float(p)) for pt, p in zip(self.points, self.probs)]

    def __len__(self):
        return len(self.probs)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs > 0))

    def mean_power(self) -> float:
        return float(self.probs @ self.points.sum(axis=1))

    def relay_powers(self) -> tuple:
        """``(E|x_r2|^2, E[|x_r11|^2 + |x_r12|^2])``."""
        e = self.probs @ self.points
        return float(e[0]), float(e[1] + e[2])


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``workers`` only controls the thread pool size; results depend on
    ``(samples, seed, chunk)`` alone.
    """

    samples: int = 1_000_000
    seed: int = 0
    chunk: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise ParameterError("samples must be a positive integer")
        if int(self.chunk) != self.chunk or self.chunk < 1:
            raise ParameterError("chunk must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ParameterError("workers must be a positive integer")


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def make_rng(seed: SeedLike = None, *key: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and an optional stream key.

    A ``Generator`` passed as ``seed`` is returned unchanged so that
    callers can thread one stream through several samplers.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_cgauss(variance: float, n: int, seed: SeedLike = None) -> np.ndarray:
    """Draw ``n`` i.i.d. circularly symmetric CN(0, variance) samples.

    Real and imaginary parts are independent with variance ``variance/2``.
    """
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance!r}")
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n!r}")
    rng = make_rng(seed)
    s = math.sqrt(variance / 2.0)
    z = rng.standard_normal((2, int(n)))
    return s * (z[0] + 1j * z[1])


def sample_isotropic_unit_vector(dim: int, seed: SeedLike = None,
                                 n: Optional[int] = None) -> np.ndarray:
    """Isotropically distributed complex unit vector(s) of length ``dim``.

    Returns shape ``(dim,)`` or ``(n, dim)`` when ``n`` is given.
    """
    if int(dim) != dim or dim < 1:
        raise ParameterError(f"dim must be a positive integer, got {dim!r}")
    rng = make_rng(seed)
    m = 1 if n is None else int(n)
    v = sample_cgauss(1.0, m * dim, rng).reshape(m, dim)
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    # a zero Gaussian vector has probability zero; redraw defensively
    while np.any(nrm == 0):
        bad = nrm[:, 0] == 0
        v[bad] = sample_cgauss(1.0, int(bad.sum()) * dim, rng).reshape(-1, dim)
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
    v = v / nrm
    return v[0] if n is None else v


def sample_half_chisq(dof: int, n: int, seed: SeedLike = None) -> np.ndarray:
    """Samples of ``chi2(dof) / 2`` for even ``dof`` (a Gamma(dof/2, 1) law)."""
    if int(dof) != dof or dof < 2 or dof % 2:
        raise ParameterError(f"dof must be an even integer >= 2, got {dof!r}")
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n!r}")
    return make_rng(seed).standard_gamma(dof / 2.0, int(n))


# ---------------------------------------------------------------------------
# Exponential integral
# ---------------------------------------------------------------------------

_E1_TOL = 1e-16


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) <= _E1_TOL * max(abs(total), 1e-300):
            break
        k += 1
    return -EULER_GAMMA - math.log(x) - total


def _e1_scaled_cf(x: float) -> float:
    # e^x E1(x) by the modified Lentz continued fraction, valid for x > 1
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= _E1_TOL:
            return h
    raise SolverError(f"E1 continued fraction did not converge at x={x}")


def exp_integral_e1(x: float) -> float:
    """Exponential integral ``E1(x) = int_x^inf exp(-t)/t dt`` for ``x > 0``.

    Uses the power series for ``x <= 1`` and a continued fraction above.
    """
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"E1 is defined here for finite x > 0, got {x!r}")
    if x <= 1.0:
        return _e1_series(x)
    return math.exp(-x) * _e1_scaled_cf(x)


def exp_integral_e1_scaled(x: float) -> float:
    """``exp(x) * E1(x)``, finite for large ``x`` where ``E1`` underflows."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"E1 is defined here for finite x > 0, got {x!r}")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_scaled_cf(x)


# ---------------------------------------------------------------------------
# Chunked Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class McEstimate:
    """Sample mean and standard error of one or more estimators."""

    mean: np.ndarray
    se: np.ndarray
    samples: int
    extra: dict = field(default_factory=dict)


def _chunk_moments(fn, seed, stream, k, m):
    vals = np.atleast_2d(np.asarray(fn(make_rng(seed, stream, k), m), dtype=float))
    mu = vals.mean(axis=1)
    m2 = ((vals - mu[:, None]) ** 2).sum(axis=1)
    return m, mu, m2


def mc_mean(fn: Callable[[np.random.Generator, int], np.ndarray], mc: McConfig,
            stream: int = 0) -> McEstimate:
    """Estimate ``E[fn]`` with deterministic per-chunk streams.

    ``fn(rng, m)`` returns ``m`` samples, or a ``(k, m)`` array for ``k``
    estimators sharing the same draws. Chunk ``i`` always uses the stream
    keyed by ``(seed, stream, i)`` and chunk statistics are merged in
    index order, so the result is bit-identical for any ``mc.workers``.
    """
    sizes = [mc.chunk] * (mc.samples // mc.chunk)
    if mc.samples % mc.chunk:
        sizes.append(mc.samples % mc.chunk)
    jobs = list(enumerate(sizes))
    if mc.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=mc.workers) as ex:
            parts = list(ex.map(lambda km: _chunk_moments(fn, mc.seed, stream, *km), jobs))
    else:
        parts = [_chunk_moments(fn, mc.seed, stream, k, m) for k, m in jobs]
    # ordered pairwise merge of (count, mean, M2)
    n, mu, m2 = parts[0]
    for nb, mub, m2b in parts[1:]:
        tot = n + nb
        delta = mub - mu
        mu = mu + delta * (nb / tot)
        m2 = m2 + m2b + delta ** 2 * (n * nb / tot)
        n = tot
    var = m2 / (n - 1) if n > 1 else np.zeros_like(m2)
    return McEstimate(mean=mu, se=np.sqrt(var / n), samples=n)


def fit_slope(x, y) -> tuple:
    """Least-squares line ``y = slope*x + intercept``; returns both."""
    slope, intercept = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope), float(intercept)
