"""Finite-SNR evaluation of the bound expressions.

psi1/psi2 for mass-point laws, the reduced cut-set objective, TS-QMF
achievable-rate terms and the log-det conditional-entropy formulas.
Rates are in bits per block of ``T`` symbols unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ContractError, MassPointDistribution, McConfig, NetworkParams,
                   ParameterError, make_rng, mc_mean, sample_cgauss)

POWER_TOL = 1e-9


# ---------------------------------------------------------------------------
# Per-point functions
# ---------------------------------------------------------------------------

def _cross(a2, b2, c2, r1, r2):
    return r2 * a2 + r1 * b2 + r1 * c2 + r1 * r2 * c2 * a2 + 1.0


def f1(a2, b2, c2, rho_rd1_sq, rho_rd2_sq, T):
    """MISO-cut integrand at the power triple ``(a2, b2, c2)``."""
    a2, b2, c2 = np.asarray(a2, float), np.asarray(b2, float), np.asarray(c2, float)
    r1, r2 = rho_rd1_sq, rho_rd2_sq
    return (T * np.log2(r2 * a2 + r1 * b2 + r1 * c2 + T)
            - np.log2(_cross(a2, b2, c2, r1, r2)))


def f2(a2, b2, c2, rho_rd1_sq, rho_rd2_sq, T):
    """Parallel-cut integrand at the power triple ``(a2, b2, c2)``."""
    a2, b2, c2 = np.asarray(a2, float), np.asarray(b2, float), np.asarray(c2, float)
    r1, r2 = rho_rd1_sq, rho_rd2_sq
    return (np.log2(r2 * a2 + r1 * b2 + 1.0) + (T - 1) * np.log2(r1 * c2 + T - 1)
            - np.log2(_cross(a2, b2, c2, r1, r2)))


def psi1(dist: MassPointDistribution, rho_rd1_sq: float, rho_rd2_sq: float, T: int) -> float:
    """``E[f1]`` over a mass-point law (exact, no sampling).

    The cross term inside the second logarithm is ``rho_rd1^2 rho_rd2^2 c2 a2``.
    """
    a, b, c = dist.points.T
    return float(dist.probs @ f1(a, b, c, rho_rd1_sq, rho_rd2_sq, T))


def psi2(dist: MassPointDistribution, rho_rd1_sq: float, rho_rd2_sq: float, T: int) -> float:
    """``E[f2]`` over a mass-point law."""
    a, b, c = dist.points.T
    return float(dist.probs @ f2(a, b, c, rho_rd1_sq, rho_rd2_sq, T))


def two_point_distribution(T: int, p_lambda: float, c_r12_sq: float) -> MassPointDistribution:
    """Law ``(T, 0, c) w.p. p`` and ``(0, T/2, T/2) w.p. 1-p``."""
    if not 0.0 <= p_lambda <= 1.0:
        raise ParameterError(f"p_lambda must be in [0, 1], got {p_lambda!r}")
    return MassPointDistribution([[T, 0.0, c_r12_sq], [0.0, T / 2, T / 2]],
                                 [p_lambda, 1.0 - p_lambda])


def cutset_objective(dist: MassPointDistribution, params: NetworkParams) -> float:
    """``min(psi1, (T-1) log2 rho_sr2^2 + psi2)`` for a power-feasible law."""
    T = params.T
    e_a, e_bc = dist.relay_powers()
    if e_a > T * (1 + POWER_TOL) or e_bc > T * (1 + POWER_TOL):
        raise ContractError(f"relay powers ({e_a:.6g}, {e_bc:.6g}) exceed T={T}")
    rho = params.link_strengths()
    t1 = psi1(dist, rho.rho_rd1_sq, rho.rho_rd2_sq, T)
    t2 = (T - 1) * math.log2(rho.rho_sr2_sq) + psi2(dist, rho.rho_rd1_sq, rho.rho_rd2_sq, T)
    return min(t1, t2)


# ---------------------------------------------------------------------------
# TS-QMF achievable rate
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    terms: dict
    binding: str
    rate_per_symbol: float
    snr: float
    active: tuple = ()

    def to_dict(self) -> dict:
        return {"terms": dict(self.terms), "binding": self.binding,
                "active": list(self.active),
                "rate_per_symbol": self.rate_per_symbol, "snr": self.snr}


def tsqmf_rate_bound(params: NetworkParams, p_lambda: float, c_r12_sq: float,
                     active_rtol: float = 1e-9) -> RateReport:
    """High-SNR TS-QMF rate terms at a finite SNR.

    ``active`` lists every term within ``active_rtol`` (relative) of the
    minimum; ``binding`` is the first of them in term order.
    """
    if not 0.0 <= p_lambda <= 1.0:
        raise ParameterError(f"p_lambda must be in [0, 1], got {p_lambda!r}")
    if c_r12_sq < 0:
        raise ParameterError(f"c_r12_sq must be >= 0, got {c_r12_sq!r}")
    T = params.T
    L = params.log2_snr()
    sr1, sr2, rd1, rd2 = params.gammas
    p = p_lambda
    mix = math.log2(c_r12_sq * params.snr ** rd1 + 1.0)
    terms = {
        "cap": (T - 1) * sr1 * L,
        "parallel": (T - 1) * sr2 * L + (1 - p) * (T - 1) * rd1 * L + p * (T - 2) * mix,
        "miso": (1 - p) * (T - 1) * rd1 * L + p * (T - 1) * rd2 * L - p * mix,
    }
    low = min(terms.values())
    active = tuple(k for k, v in terms.items()
                   if v - low <= active_rtol * max(1.0, abs(low)))
    return RateReport(terms, active[0], low / T, params.snr, active)


# ---------------------------------------------------------------------------
# Log-det conditional entropies
# ---------------------------------------------------------------------------

@dataclass
class MisoEntropy:
    """Monte Carlo log-det value next to its closed-form bound (bits)."""

    mc_value: float
    se: float
    closed_bound: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.mc_value <= self.closed_bound + self.slack + 3 * self.se


def miso_cond_entropy(a1_sq: float, a2_sq: float, rho11_sq: float, rho12_sq: float,
                      T: int, mc: McConfig) -> MisoEntropy:
    """``E log2 det(I_T + rho11^2 a1^2 X1^H X1 + rho12^2 a2^2 X2^H X2)`` by Monte Carlo.

    ``X1, X2`` are independent 1xT rows with i.i.d. CN(0,1) entries. The
    determinant is evaluated through the 2x2 Gram matrix of the two rows.
    ``closed_bound`` is ``log2((1 + rho11^2 a1^2)(1 + rho12^2 a2^2))`` and
    ``slack = 2 log2 T`` covers the Jensen step for the row norms.
    """
    for name, v in (("a1_sq", a1_sq), ("a2_sq", a2_sq), ("rho11_sq", rho11_sq),
                    ("rho12_sq", rho12_sq)):
        if v < 0:
            raise ParameterError(f"{name} must be >= 0")
    if T < 2:
        raise ParameterError("T must be >= 2")
    k1, k2 = rho11_sq * a1_sq, rho12_sq * a2_sq

    def draw(rng, m):
        x1 = sample_cgauss(1.0, m * T, rng).reshape(m, T)
        x2 = sample_cgauss(1.0, m * T, rng).reshape(m, T)
        n1 = np.sum(np.abs(x1) ** 2, axis=1)
        n2 = np.sum(np.abs(x2) ** 2, axis=1)
        cr = np.abs(np.sum(np.conj(x1) * x2, axis=1)) ** 2
        det = 1.0 + k1 * n1 + k2 * n2 + k1 * k2 * (n1 * n2 - cr)
        return np.log2(det)

    est = mc_mean(draw, mc)
    closed = math.log2((1 + k1) * (1 + k2))
    return MisoEntropy(float(est.mean[0]), float(est.se[0]), closed, 2 * math.log2(T))


def logdet_identity_errors(M: int, T: int, seed=None, n_draws: int = 100,
                           d_scale: float = 1.0) -> np.ndarray:
    """Relative errors of ``det(I_T + L^H D L) = det(I_M + L_M^H D L_M)``.

    ``L`` is ``M x T`` with a lower-triangular leading ``M x M`` block and
    zero columns beyond ``M``; ``D`` is diagonal with positive entries
    scaled by ``d_scale``.
    """
    if not 1 <= M < T:
        raise ParameterError("need T > M >= 1")
    rng = make_rng(seed)
    errs = np.empty(n_draws)
    for k in range(n_draws):
        Lm = np.tril(sample_cgauss(1.0, M * M, rng).reshape(M, M))
        L = np.zeros((M, T), dtype=complex)
        L[:, :M] = Lm
        D = np.diag(d_scale * rng.exponential(1.0, M))
        lhs = np.linalg.det(np.eye(T) + L.conj().T @ D @ L).real
        rhs = np.linalg.det(np.eye(M) + Lm.conj().T @ D @ Lm).real
        errs[k] = abs(lhs - rhs) / abs(rhs)
    return errs


def logdet_identity_check(M: int, T: int, seed=None, n_draws: int = 100,
                          d_scale: float = 1.0, rtol: float = 1e-9) -> bool:
    """Whether the lower-triangular log-det reduction holds on random draws."""
    return bool(np.max(logdet_identity_errors(M, T, seed, n_draws, d_scale)) < rtol)
