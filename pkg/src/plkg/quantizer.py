"""One-bit guard-band quantizer and event bookkeeping.

Amplitudes at or above the upper threshold map to bit 1, amplitudes
below the lower threshold to bit 0, and anything inside the guard band
is discarded. Both parties drop the discarded positions after exchanging
their indices, so the resulting keys always have equal length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "DELTA_MAX",
    "QuantSymbol",
    "EventKind",
    "GuardBandQuantizer",
    "make_quantizer",
    "empirical_quantizer",
    "quantize_one",
    "quantize",
    "classify_event",
    "classify_events",
    "reconcile_indices",
]

# Largest guard parameter keeping the lower threshold positive for
# Rayleigh-consistent moments: mu_g/sigma_g = sqrt(pi/(4-pi)).
DELTA_MAX = math.sqrt(math.pi / (4.0 - math.pi))

# Rayleigh amplitude moments as multiples of sigma_hat. "pdf" matches the
# joint density used by the closed forms (E[g^2] = sigma_hat^2); the
# "per-quadrature" variant treats sigma_hat as the scale of each real
# quadrature (E[g^2] = 2 sigma_hat^2), so both moments are sqrt(2) larger.
_CONVENTIONS = {
    "pdf": (math.sqrt(math.pi) / 2.0, math.sqrt(1.0 - math.pi / 4.0)),
    "per-quadrature": (math.sqrt(math.pi / 2.0), math.sqrt(2.0 - math.pi / 2.0)),
}


class QuantSymbol(IntEnum):
    BIT0 = 0
    BIT1 = 1
    DISCARD = -1


class EventKind(IntEnum):
    EVENT1 = 1  # same bit on both sides
    EVENT2 = 2  # different bits
    EVENT3 = 3  # at least one side discarded


@dataclass(frozen=True)
class GuardBandQuantizer:
    delta: float
    mu_g: float
    sigma_g: float

    def __post_init__(self):
        if not (0.0 <= self.delta < DELTA_MAX):
            raise ValueError(
                f"delta must lie in [0, {DELTA_MAX:.4f}) so the lower "
                f"threshold stays positive, got {self.delta}"
            )
        if self.sigma_g <= 0 or self.mu_g <= 0:
            raise ValueError("mu_g and sigma_g must be > 0")

    @property
    def gamma_u(self) -> float:
        return self.mu_g + self.delta * self.sigma_g

    @property
    def gamma_l(self) -> float:
        return self.mu_g - self.delta * self.sigma_g


def make_quantizer(
    sigma_hat: float, delta: float, convention: str = "pdf"
) -> GuardBandQuantizer:
    """Thresholds from the analytic Rayleigh moments of the amplitude."""
    if sigma_hat <= 0:
        raise ValueError(f"sigma_hat must be > 0, got {sigma_hat}")
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown moment convention {convention!r}")
    mu_c, sigma_c = _CONVENTIONS[convention]
    return GuardBandQuantizer(delta=delta, mu_g=mu_c * sigma_hat, sigma_g=sigma_c * sigma_hat)


def empirical_quantizer(samples, delta: float) -> GuardBandQuantizer:
    """Thresholds from the sample mean/std of an amplitude sequence."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least 2 samples for empirical moments")
    return GuardBandQuantizer(delta=delta, mu_g=float(arr.mean()), sigma_g=float(arr.std()))


def quantize_one(q: GuardBandQuantizer, g: float) -> QuantSymbol:
    """Bit 1 iff g >= gamma_u, bit 0 iff g < gamma_l, else discard."""
    if not (g >= 0.0):
        raise ValueError(f"amplitude must be >= 0, got {g}")
    if g >= q.gamma_u:
        return QuantSymbol.BIT1
    if g < q.gamma_l:
        return QuantSymbol.BIT0
    return QuantSymbol.DISCARD


def quantize(q: GuardBandQuantizer, g) -> np.ndarray:
    """Vectorized quantize_one; returns an int array of QuantSymbol values."""
    arr = np.asarray(g, dtype=float)
    if np.any(arr < 0):
        raise ValueError("amplitudes must be >= 0")
    out = np.full(arr.shape, int(QuantSymbol.DISCARD), dtype=np.int8)
    out[arr >= q.gamma_u] = int(QuantSymbol.BIT1)
    out[arr < q.gamma_l] = int(QuantSymbol.BIT0)
    return out


def classify_event(q: GuardBandQuantizer, g_a: float, g_b: float) -> EventKind:
    sa = quantize_one(q, g_a)
    sb = quantize_one(q, g_b)
    if sa is QuantSymbol.DISCARD or sb is QuantSymbol.DISCARD:
        return EventKind.EVENT3
    return EventKind.EVENT1 if sa is sb else EventKind.EVENT2


def classify_events(q: GuardBandQuantizer, g_a, g_b) -> np.ndarray:
    """Vectorized classification; returns an int array of EventKind values."""
    sa = quantize(q, g_a)
    sb = quantize(q, g_b)
    if sa.shape != sb.shape:
        raise ValueError("g_a and g_b must have the same length")
    out = np.full(sa.shape, int(EventKind.EVENT3), dtype=np.int8)
    effective = (sa != int(QuantSymbol.DISCARD)) & (sb != int(QuantSymbol.DISCARD))
    out[effective & (sa == sb)] = int(EventKind.EVENT1)
    out[effective & (sa != sb)] = int(EventKind.EVENT2)
    return out


def reconcile_indices(symbols_a, symbols_b):
    """Drop positions where either side discarded; keys stay aligned.

    Returns (key_a, key_b, kept_indices) with equal-length bit arrays.
    """
    sa = np.asarray(symbols_a, dtype=np.int8)
    sb = np.asarray(symbols_b, dtype=np.int8)
    if sa.shape != sb.shape:
        raise ValueError(
            f"symbol sequences differ in length: {sa.shape} vs {sb.shape}"
        )
    kept = np.flatnonzero(
        (sa != int(QuantSymbol.DISCARD)) & (sb != int(QuantSymbol.DISCARD))
    )
    return sa[kept].copy(), sb[kept].copy(), kept
