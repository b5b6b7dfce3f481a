"""Confident-region thresholds: the EMICoRe rule and the PEDT family.

Both rules look at the window-averaged change of the best predicted energy,

    change = (mu[t - t_avg] - mu[t]) / t_avg

EMICoRe uses ``max(0, change)``. PEDT uses ``delta = |change|`` and

    kappa = (a * sigma0) * min(delta, b / (c + d * exp(-f * delta)))

with ``(a, b, c, d, f) = (1/2, 1, 3, 1, 1)`` for the standard variant. The
lenient and strict variants only change ``c`` (to 1 and 5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from scipy.optimize import brentq

VARIANTS = ("emicore", "pedt", "pedt_generalized", "pedt_lenient", "pedt_strict")


class WarmupError(LookupError):
    """Not enough history for a full averaging window."""


class ThresholdConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PedtConstants:
    a: float = 0.5
    b: float = 1.0
    c: float = 3.0
    d: float = 1.0
    f: float = 1.0

    def validate(self) -> "PedtConstants":
        if self.a < 0 or self.b < 0:
            raise ThresholdConfigError(f"a and b must be nonnegative, got a={self.a}, b={self.b}")
        # denominator c + d*exp(-f*delta) must stay positive on delta >= 0
        ok = (
            (self.c > 0 and self.d >= 0)
            or (self.c + self.d > 0 and self.f == 0)
            or (self.c + self.d > 0 and self.f > 0 and self.c >= 0)
        )
        if not ok:
            raise ThresholdConfigError(
                f"c + d*exp(-f*delta) can reach zero for c={self.c}, d={self.d}, f={self.f}"
            )
        return self

    def shape(self, delta: float) -> float:
        return min(delta, self.b / (self.c + self.d * math.exp(-self.f * delta)))

    def kappa(self, delta: float, sigma0: float) -> float:
        return (self.a * sigma0) * self.shape(delta)


STANDARD = PedtConstants()
LENIENT = PedtConstants(c=1.0)
STRICT = PedtConstants(c=5.0)


def constants_for(variant: str, generalized: Optional[PedtConstants] = None) -> Optional[PedtConstants]:
    if variant == "emicore":
        return None
    if variant == "pedt":
        return STANDARD
    if variant == "pedt_lenient":
        return LENIENT
    if variant == "pedt_strict":
        return STRICT
    if variant == "pedt_generalized":
        return (generalized or STANDARD).validate()
    raise ThresholdConfigError(f"unknown threshold variant {variant!r}; choose from {VARIANTS}")


def pedt_crossover(b: float = 1.0, c: float = 3.0, d: float = 1.0, f: float = 1.0) -> float:
    """Positive root of ``delta = b / (c + d exp(-f delta))``: where the two PEDT branches meet."""
    g = lambda x: x - b / (c + d * math.exp(-f * x))  # noqa: E731
    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 1e-15, hi, xtol=1e-15)


@dataclass(frozen=True)
class KappaTraceEntry:
    iteration: int
    kappa: float
    delta_e: Optional[float]
    mu_t: float


@dataclass(frozen=True)
class ThresholdState:
    """Rolling energy history plus the currently active kappa.

    ``warmup_kappa=None`` means ``sigma0 / 6``, the ceiling of standard PEDT.
    """

    sigma0: float
    t_avg: int = 10
    variant: str = "pedt"
    constants: PedtConstants = STANDARD
    warmup_kappa: Optional[float] = None
    mu_history: Tuple[float, ...] = ()
    trace: Tuple[KappaTraceEntry, ...] = ()
    current_kappa: float = field(default=None)

    def __post_init__(self):
        if self.t_avg < 1:
            raise ThresholdConfigError("t_avg must be a positive integer")
        if self.sigma0 <= 0:
            raise ThresholdConfigError("sigma0 must be positive")
        constants_for(self.variant, self.constants)
        if self.current_kappa is None:
            object.__setattr__(self, "current_kappa", self.warmup_value)

    @property
    def warmup_value(self) -> float:
        if self.warmup_kappa is not None:
            return float(self.warmup_kappa)
        return self.sigma0 / 6.0

    @property
    def in_warmup(self) -> bool:
        return len(self.mu_history) <= self.t_avg

    @property
    def active_constants(self) -> Optional[PedtConstants]:
        return constants_for(self.variant, self.constants)

    def update(self, new_mu: float, iteration: Optional[int] = None) -> "ThresholdState":
        history = self.mu_history + (float(new_mu),)
        state = replace(self, mu_history=history, current_kappa=self.current_kappa)
        if state.in_warmup:
            kappa, delta = state.warmup_value, None
        else:
            delta = delta_e(state)
            if self.variant == "emicore":
                kappa = kappa_emicore(state)
            else:
                kappa = state.active_constants.kappa(delta, self.sigma0)
        if iteration is None:
            iteration = len(self.trace) + 1
        entry = KappaTraceEntry(iteration, kappa, delta, float(new_mu))
        return replace(state, current_kappa=kappa, trace=self.trace + (entry,))


def window_change(state: ThresholdState) -> float:
    """Signed average decrease ``(mu[t - t_avg] - mu[t]) / t_avg``."""
    if state.in_warmup:
        raise WarmupError(
            f"need more than {state.t_avg} energies, have {len(state.mu_history)}"
        )
    mu = state.mu_history
    return (mu[-1 - state.t_avg] - mu[-1]) / state.t_avg


def delta_e(state: ThresholdState) -> float:
    return abs(window_change(state))


def kappa_emicore(state: ThresholdState) -> float:
    return max(0.0, window_change(state))


def kappa_pedt(state: ThresholdState, sigma0: float) -> float:
    return STANDARD.kappa(delta_e(state), sigma0)


def kappa_generalized(
    state: ThresholdState, sigma0: float, a: float, b: float, c: float, d: float, f: float
) -> float:
    consts = PedtConstants(a, b, c, d, f).validate()
    return consts.kappa(delta_e(state), sigma0)


def update_threshold(state: ThresholdState, new_mu: float, sigma0: Optional[float] = None) -> ThresholdState:
    if sigma0 is not None and sigma0 != state.sigma0:
        state = replace(state, sigma0=sigma0)
    return state.update(new_mu)
