"""Closed-form gDoF values of the noncoherent diamond network.

All values are per symbol and per ``log2(SNR)``; multiply by ``T`` for the
per-block convention used by the optimization problems.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .core import ContractError, NetworkParams
from .regime import Regime, canonicalize, classify, nontrivial_conditions

BOUNDARY_TOL = 1e-12
AGREE_TOL = 1e-9


@dataclass(frozen=True)
class GdofResult:
    gdof: float
    regime: Regime
    active_formula: str
    relay_used: Union[int, str, None]
    subregime: Optional[str] = None

    def to_dict(self) -> dict:
        return {"gdof": self.gdof, "regime": self.regime.to_dict(),
                "active_formula": self.active_formula,
                "relay_used": self.relay_used, "subregime": self.subregime}


def _scaled(T: int, v: float) -> float:
    # (1 - 1/T) v written so that integer-friendly inputs round exactly
    return (T - 1) * v / T


def gdof_simple_bound(params: NetworkParams) -> float:
    """Simple cut-set outer bound ``(1-1/T) min(max sr, max rd)``."""
    sr1, sr2, rd1, rd2 = params.gammas
    return _scaled(params.T, min(max(sr1, sr2), max(rd1, rd2)))


def gdof_relay_selection(params: NetworkParams) -> tuple:
    """Best single-relay gDoF and the relay achieving it (ties go to relay 1)."""
    sr1, sr2, rd1, rd2 = params.gammas
    v1, v2 = min(sr1, rd1), min(sr2, rd2)
    relay = 1 if v1 >= v2 else 2
    return _scaled(params.T, max(v1, v2)), relay


def _case1(T, sr2, rd1, rd2):
    if rd2 == 0.0:
        return 0.0
    return _scaled(T, sr2 + rd1 - sr2 * rd1 / rd2)


def _case21(T, sr2, rd1, rd2):
    return _scaled(T, sr2 + rd1) - sr2 * rd1 / (T * (rd2 - rd1))


def _case22(T, sr2, rd1, rd2):
    return sr2 / T + (1.0 - 2.0 / T) * rd2


def nontrivial_subregime(params: NetworkParams) -> str:
    """Nontrivial subregime label ``"1"``, ``"2.1"`` or ``"2.2"``."""
    T = params.T
    _, sr2, rd1, rd2 = params.gammas
    if (T - 2) * rd2 - (T - 1) * rd1 <= 0:
        return "1"
    if rd2 > sr2 + rd1:
        return "2.1"
    return "2.2"


def gdof_nontrivial(params: NetworkParams) -> tuple:
    """Nontrivial-regime gDoF by subregime; returns ``(value, subregime)``.

    ``params`` must already be canonical (relay 1 the strong source link).
    On subregime boundaries the adjacent formulas are both evaluated and
    must agree to ``1e-9``.
    """
    if not nontrivial_conditions(params.gammas, BOUNDARY_TOL):
        raise ContractError(f"exponents {params.gammas} are not in the canonical nontrivial regime")
    T = params.T
    _, sr2, rd1, rd2 = params.gammas
    sub = nontrivial_subregime(params)
    formulas = {"1": _case1, "2.1": _case21, "2.2": _case22}
    value = formulas[sub](T, sr2, rd1, rd2)

    q = (T - 2) * rd2 - (T - 1) * rd1
    scale = max(1.0, rd2)
    neighbours = []
    if abs(q) <= BOUNDARY_TOL * scale * T:
        neighbours += ["1", "2.1" if rd2 > sr2 + rd1 else "2.2"]
    if q > -BOUNDARY_TOL * scale * T and abs(rd2 - sr2 - rd1) <= BOUNDARY_TOL * scale:
        neighbours += ["2.1", "2.2"]
    for other in set(neighbours) - {sub}:
        if other == "2.1" and rd2 - rd1 <= 0:
            continue
        alt = formulas[other](T, sr2, rd1, rd2)
        if abs(alt - value) > AGREE_TOL * max(1.0, abs(value)):
            raise ContractError(f"subregime formulas {sub} and {other} disagree: {value} vs {alt}")
    return value, sub


def gdof_training(params: NetworkParams) -> tuple:
    """Per-symbol gDoF of the two training-based schemes.

    Returns ``(gamma1_train, gamma2_train_ub)``: relay selection with
    training, and the upper bound for schemes that train every link.
    """
    T = params.T
    if T < 2:
        raise ContractError("training needs T >= 2")
    sr1, sr2, rd1, rd2 = params.gammas
    g1 = (T - 1) * max(min(sr1, rd1), min(sr2, rd2))
    g2 = min((T - 1) * sr1, (T - 2) * rd2, (T - 1) * sr2 + (T - 2) * rd1,
             (T - 1) * sr1 + (T - 2) * rd2)
    return g1 / T, g2 / T


def gdof_network(params: NetworkParams) -> GdofResult:
    """Network gDoF dispatched on the regime.

    In the nontrivial regime the subregime value is capped at
    ``(1-1/T) gamma_sr1`` since both the outer bound and the TS-QMF
    rate carry that term.
    """
    regime = classify(params)
    if params.T == 1:
        return GdofResult(0.0, regime, "T=1", None)
    if regime.kind.is_relay_select:
        value, relay = gdof_relay_selection(params)
        return GdofResult(value, regime, "relay_selection", relay)
    canon, _ = canonicalize(params)
    table, sub = gdof_nontrivial(canon)
    cap = _scaled(params.T, canon.gamma_sr1)
    if cap < table:
        return GdofResult(cap, regime, "sr1_cap", "both", sub)
    return GdofResult(table, regime, f"nontrivial_case_{sub}", "both", sub)
