"""Regime classification of the 2-relay diamond network.

Link labels are numbered 1=sr1, 2=sr2, 3=rd1, 4=rd2. An ordering of the
four SNR exponents is the permutation of labels listed from largest to
smallest exponent, and its index is the 1-based lexicographic rank among
the 24 permutations (1234 -> 1, 4321 -> 24).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional

from .core import NetworkParams

PERMUTATIONS = tuple(itertools.permutations((1, 2, 3, 4)))


class RegimeKind(str, enum.Enum):
    RELAY_SELECT_SR_LIMITED = "RelaySelect_SrLimited"
    RELAY_SELECT_RD_LIMITED = "RelaySelect_RdLimited"
    NONTRIVIAL = "Nontrivial"

    @property
    def is_relay_select(self) -> bool:
        return self is not RegimeKind.NONTRIVIAL


# Regimes reached without relabeling (canonical table) and with the relay
# labels exchanged, keyed by permutation index.
CANONICAL_TABLE = {
    RegimeKind.RELAY_SELECT_SR_LIMITED: (13, 14, 17, 23),
    RegimeKind.RELAY_SELECT_RD_LIMITED: (4, 3, 1, 7),
    RegimeKind.NONTRIVIAL: (6, 5, 20, 19),
}
SWAPPED_TABLE = {
    RegimeKind.RELAY_SELECT_SR_LIMITED: (21, 22, 24, 18),
    RegimeKind.RELAY_SELECT_RD_LIMITED: (12, 11, 8, 2),
    RegimeKind.NONTRIVIAL: (10, 9, 16, 15),
}

_INDEX_TO_REGIME = {}
for _swapped, _table in ((False, CANONICAL_TABLE), (True, SWAPPED_TABLE)):
    for _kind, _indices in _table.items():
        for _i in _indices:
            _INDEX_TO_REGIME[_i] = (_kind, _swapped)
assert sorted(_INDEX_TO_REGIME) == list(range(1, 25))


@dataclass(frozen=True)
class Regime:
    """Classification result.

    ``selected_relay`` is the relay used by relay selection (in the
    original labels) and ``None`` for the nontrivial regime.
    """

    kind: RegimeKind
    selected_relay: Optional[int]
    swapped: bool
    permutation_index: int

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "selected_relay": self.selected_relay,
                "swapped": self.swapped, "permutation_index": self.permutation_index}


def permutation_index(perm) -> int:
    """1-based lexicographic rank of a permutation of (1, 2, 3, 4)."""
    return PERMUTATIONS.index(tuple(perm)) + 1


def consistent_permutations(gammas) -> list:
    """Indices of all orderings compatible with ``gammas`` (ties allowed)."""
    out = []
    for idx, perm in enumerate(PERMUTATIONS, start=1):
        vals = [gammas[label - 1] for label in perm]
        if all(vals[i] >= vals[i + 1] for i in range(3)):
            out.append(idx)
    return out


def regime_of_index(index: int) -> tuple:
    """``(kind, swapped)`` listed for a strict ordering's permutation index."""
    return _INDEX_TO_REGIME[index]


def nontrivial_conditions(gammas, tol: float = 0.0) -> bool:
    """Whether ``(sr1, sr2, rd1, rd2)`` satisfies the canonical nontrivial-regime inequalities."""
    sr1, sr2, rd1, rd2 = gammas
    return (sr1 >= sr2 - tol and sr1 >= rd1 - tol
            and rd2 >= rd1 - tol and rd2 >= sr2 - tol)


def classify(params: NetworkParams) -> Regime:
    """Classify ``params`` into a regime.

    With tied exponents several orderings are consistent; relay-selection
    regimes are preferred, then the lowest permutation index.
    """
    candidates = consistent_permutations(params.gammas)
    best = min(candidates,
               key=lambda i: (not regime_of_index(i)[0].is_relay_select, i))
    kind, swapped = regime_of_index(best)
    relay = (2 if swapped else 1) if kind.is_relay_select else None
    return Regime(kind, relay, swapped, best)


def canonicalize(params: NetworkParams) -> tuple:
    """Relabel the relays if needed so the regime is in the canonical table.

    Returns ``(params', swapped)``.
    """
    swapped = classify(params).swapped
    return (params.swapped() if swapped else params), swapped
