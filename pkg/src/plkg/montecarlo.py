"""Monte Carlo estimation of the key-rate metrics and the closed-form
cross-validation harness.

Event probabilities are frequency estimates with binomial standard
errors; the KDR standard error comes from the delta method applied to
the ratio P2/(P1+P2). ``validate`` standardizes each empirical estimate
against the closed form and passes iff every |z| stays under threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import KeyRateResult, key_rates
from .channel import CorrelationModel, sample_pairs
from .quantizer import EventKind, GuardBandQuantizer, classify_events
from .specfun import DEFAULT_CONTROL, SeriesControl

__all__ = [
    "McEstimate",
    "EmpiricalKeyRates",
    "ValidationReport",
    "empirical_key_rates",
    "empirical_mse",
    "validate",
]


class EstimationError(RuntimeError):
    """No effective samples (or otherwise degenerate estimate)."""


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n: int


@dataclass(frozen=True)
class EmpiricalKeyRates:
    p1: McEstimate
    p2: McEstimate
    p3: McEstimate
    kdr: McEstimate
    esr: McEstimate

    @property
    def rates(self) -> KeyRateResult:
        return KeyRateResult(
            p1=self.p1.value,
            p2=self.p2.value,
            p3=self.p3.value,
            kdr=self.kdr.value,
            esr=self.esr.value,
        )


@dataclass(frozen=True)
class ValidationReport:
    closed_form: KeyRateResult
    empirical: EmpiricalKeyRates
    z_scores: dict[str, float]
    z_threshold: float
    passed: bool


def _binomial_estimate(count: int, n: int) -> McEstimate:
    p = count / n
    return McEstimate(value=p, std_error=math.sqrt(p * (1.0 - p) / n), n=n)


def empirical_key_rates(
    model: CorrelationModel,
    q: GuardBandQuantizer,
    n_samples: int,
    seed: int | np.random.Generator,
) -> EmpiricalKeyRates:
    """Frequency estimates of P1/P2/P3, KDR and ESR from fresh pairs."""
    if n_samples < 10_000:
        raise ValueError(f"n_samples must be >= 10000, got {n_samples}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h_a, h_b = sample_pairs(model, n_samples, rng)
    events = classify_events(q, np.abs(h_a), np.abs(h_b))
    n1 = int(np.count_nonzero(events == int(EventKind.EVENT1)))
    n2 = int(np.count_nonzero(events == int(EventKind.EVENT2)))
    n3 = n_samples - n1 - n2
    effective = n1 + n2
    if effective == 0:
        raise EstimationError(
            f"all {n_samples} samples fell in the guard band; cannot estimate KDR"
        )
    kdr = n2 / effective
    return EmpiricalKeyRates(
        p1=_binomial_estimate(n1, n_samples),
        p2=_binomial_estimate(n2, n_samples),
        p3=_binomial_estimate(n3, n_samples),
        kdr=McEstimate(kdr, math.sqrt(kdr * (1.0 - kdr) / effective), effective),
        esr=_binomial_estimate(effective, n_samples),
    )


def empirical_mse(values_a, values_b) -> McEstimate:
    """Mean squared difference of two aligned sequences, with its SEM."""
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need at least 2 aligned values")
    sq = (a - b) ** 2
    return McEstimate(
        value=float(sq.mean()),
        std_error=float(sq.std(ddof=1) / math.sqrt(sq.size)),
        n=sq.size,
    )


def _z(emp: McEstimate, ref: float) -> float:
    diff = emp.value - ref
    if emp.std_error == 0.0:
        # degenerate estimate (e.g. ESR at delta=0); allow series residue
        return 0.0 if abs(diff) <= 1e-9 else math.inf
    return diff / emp.std_error


def validate(
    model: CorrelationModel,
    q: GuardBandQuantizer,
    n_samples: int,
    seed: int,
    z_threshold: float = 4.0,
    ctl: SeriesControl = DEFAULT_CONTROL,
    closed_form: KeyRateResult | None = None,
) -> ValidationReport:
    """Compare Monte Carlo frequencies against the closed forms.

    ``closed_form`` can be injected to test the harness's sensitivity;
    by default it is computed from (model, q).
    """
    cf = closed_form if closed_form is not None else key_rates(model, q, ctl)
    emp = empirical_key_rates(model, q, n_samples, seed)
    z_scores = {
        "p1": _z(emp.p1, cf.p1),
        "p2": _z(emp.p2, cf.p2),
        "p3": _z(emp.p3, cf.p3),
        "kdr": _z(emp.kdr, cf.kdr),
        "esr": _z(emp.esr, cf.esr),
    }
    passed = all(abs(z) <= z_threshold for z in z_scores.values())
    return ValidationReport(
        closed_form=cf,
        empirical=emp,
        z_scores=z_scores,
        z_threshold=z_threshold,
        passed=passed,
    )
