"""Privacy budget ledger with two composition rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigError

ADVANCED = "advanced_composition"
LITERAL = "eq14_literal"
MODES = (ADVANCED, LITERAL)


@dataclass(frozen=True)
class LedgerEntry:
    round: int
    epsilon: float
    delta: float
    q: float = 1.0


@dataclass
class PrivacyLedger:
    mode: str = ADVANCED
    _entries: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown accountant mode {self.mode!r}")

    def record(self, round, epsilon, delta, q=1.0):
        self._entries.append(LedgerEntry(int(round), float(epsilon), float(delta), float(q)))

    @property
    def entries(self):
        return tuple(self._entries)

    def __len__(self):
        return len(self._entries)

    def total(self, mode=None):
        return compose_budget(self, mode)


def advanced_composition(entries):
    """``sqrt(2 ln(1/delta) * sum eps_t^2)`` with ``delta`` the largest per-round delta.

    Equal rounds reduce to ``eps * sqrt(2 T ln(1/delta))``; deltas add.
    """
    d = max(e.delta for e in entries)
    eps = math.sqrt(2.0 * math.log(1.0 / d) * sum(e.epsilon ** 2 for e in entries))
    return eps, sum(e.delta for e in entries)


def literal_bound(entries):
    """``sqrt(sum q eps^2) + sum q eps / delta``; equal rounds give ``eps sqrt(Tq) + qT eps / delta``."""
    eps = math.sqrt(sum(e.q * e.epsilon ** 2 for e in entries))
    eps += sum(e.q * e.epsilon / e.delta for e in entries)
    return eps, sum(e.delta for e in entries)


def compose_budget(ledger: PrivacyLedger, mode=None):
    """Return ``(eps_total, delta_total, mode)``."""
    mode = mode or ledger.mode
    if not len(ledger):
        raise ConfigError("privacy ledger is empty")
    if mode == ADVANCED:
        eps, d = advanced_composition(ledger.entries)
    elif mode == LITERAL:
        eps, d = literal_bound(ledger.entries)
    else:
        raise ConfigError(f"unknown accountant mode {mode!r}")
    return eps, d, mode
