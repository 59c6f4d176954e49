"""Closed-form key-rate and energy-efficiency expressions.

Event probabilities come from series expansions of the bivariate
Rayleigh integrals (Marcum-Q based); every term uses regularized
incomplete gammas so nothing factorial-sized is ever formed. Truncation
is governed by a rigorous tail bound: the k-th term carries a factor
rho^{2k} and a regularized lower gamma that is non-increasing in k, so
the remainder after K terms is bounded by the product of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import CorrelationModel, SystemParams, dbm_to_mw, dbm_to_w, derive_correlation
from .quantizer import GuardBandQuantizer, make_quantizer
from .specfun import DEFAULT_CONTROL, ConvergenceError, SeriesControl, poisson_pmf

__all__ = [
    "KeyRateResult",
    "EnergyReport",
    "p1_closed_form",
    "p2_closed_form",
    "key_rates",
    "outage_probability",
    "energy_efficiency",
    "optimal_allocation",
]


@dataclass(frozen=True)
class KeyRateResult:
    p1: float   # both sides emit the same bit
    p2: float   # the sides emit different bits
    p3: float   # at least one side lands in the guard band
    kdr: float  # p2 / (p1 + p2)
    esr: float  # p1 + p2


@dataclass(frozen=True)
class EnergyReport:
    a: float           # pilot power fraction P_pilot / P
    n_samples: float   # expected samples per key bit budget, N / P1
    e_key: float       # pilot energy [J]
    e_data: float      # data-transmission energy [J]
    e_total: float     # e_key + e_data [J]
    p_out: float       # outage probability of the data channel
    throughput: float  # R0 * (1 - p_out)
    ee: float          # throughput / e_total


def _series_inputs(model: CorrelationModel, q: GuardBandQuantizer):
    rho2 = model.rho * model.rho
    if rho2 >= 1.0:
        raise ValueError(f"series requires |rho| < 1, got rho={model.rho}")
    if q.gamma_l <= 0.0:
        raise ValueError("thresholds must be positive")
    se2 = model.sigma_e_sq
    return rho2, q.gamma_u ** 2 / se2, q.gamma_l ** 2 / se2


def p2_closed_form(
    model: CorrelationModel,
    q: GuardBandQuantizer,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> float:
    """Probability that the two sides quantize to different bits.

    P2 = 2 (1 - rho^2) sum_k rho^{2k} Q(k+1, yU) P(k+1, yL) with
    regularized gammas, yU = gamma_u^2/sigma_e^2, yL = gamma_l^2/sigma_e^2.
    """
    rho2, y_u, y_l = _series_inputs(model, q)
    total = 0.0
    q_u = 0.0   # regularized upper gamma Q(k+1, y_u)
    q_l = 0.0
    rk = 1.0    # rho^{2k}
    for k in range(ctl.max_terms):
        q_u = min(1.0, q_u + poisson_pmf(k, y_u))
        q_l = min(1.0, q_l + poisson_pmf(k, y_l))
        p_l = 1.0 - q_l
        total += rk * q_u * p_l
        tail = 2.0 * p_l * rk * rho2
        if tail <= ctl.relative_tolerance:
            return min(1.0, 2.0 * (1.0 - rho2) * total)
        rk *= rho2
    raise ConvergenceError(
        f"P2 series did not converge within {ctl.max_terms} terms",
        partial=2.0 * (1.0 - rho2) * total,
        terms_used=ctl.max_terms,
    )


def p1_closed_form(
    model: CorrelationModel,
    q: GuardBandQuantizer,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> float:
    """Probability that the two sides quantize to the same bit.

    The both-above-gamma_u series sum_k rho^{2k} Q(k+1, yU)^2 is
    rewritten via Q = 1 - P so that, like the other sums, its terms die
    with the regularized lower gamma instead of only geometrically.
    """
    rho2, y_u, y_l = _series_inputs(model, q)
    s_mixed = 0.0   # sum rho^{2k} Q(k+1,yL) P(k+1,yL)
    s_upper = 0.0   # sum rho^{2k} (2 P(k+1,yU) - P(k+1,yU)^2)
    q_u = 0.0
    q_l = 0.0
    rk = 1.0
    for k in range(ctl.max_terms):
        q_u = min(1.0, q_u + poisson_pmf(k, y_u))
        q_l = min(1.0, q_l + poisson_pmf(k, y_l))
        p_u = 1.0 - q_u
        p_l = 1.0 - q_l
        s_mixed += rk * q_l * p_l
        s_upper += rk * (2.0 - p_u) * p_u
        tail = (p_l + 2.0 * p_u) * rk * rho2
        if tail <= ctl.relative_tolerance:
            p1 = (
                2.0
                - math.exp(-q.gamma_l ** 2 / model.sigma_hat_sq)
                - (1.0 - rho2) * (s_mixed + s_upper)
            )
            return min(1.0, max(0.0, p1))
        rk *= rho2
    raise ConvergenceError(
        f"P1 series did not converge within {ctl.max_terms} terms",
        partial=2.0
        - math.exp(-q.gamma_l ** 2 / model.sigma_hat_sq)
        - (1.0 - rho2) * (s_mixed + s_upper),
        terms_used=ctl.max_terms,
    )


def key_rates(
    model: CorrelationModel,
    q: GuardBandQuantizer,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> KeyRateResult:
    """Bundle P1, P2, P3 = 1 - P1 - P2, KDR and ESR."""
    p1 = p1_closed_form(model, q, ctl)
    p2 = p2_closed_form(model, q, ctl)
    p3 = 0.0 if q.delta == 0.0 else max(0.0, 1.0 - p1 - p2)
    esr = p1 + p2
    return KeyRateResult(p1=p1, p2=p2, p3=p3, kdr=p2 / esr, esr=esr)


def outage_probability(params: SystemParams, a: float) -> float:
    """Outage of the data link when a fraction ``a`` of P feeds pilots."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"allocation fraction must be in (0,1), got {a}")
    p_mw = dbm_to_mw(params.total_power_dbm)
    noise_mw = dbm_to_mw(params.noise_dbm)
    threshold = (2.0 ** params.rate_r0 - 1.0) * noise_mw
    return 1.0 - math.exp(-threshold / ((1.0 - a) * p_mw * params.sigma_h_sq))


def energy_efficiency(params: SystemParams, a: float, p1: float) -> EnergyReport:
    """Energy/throughput bookkeeping for a given allocation and P1.

    ``p1`` must be the same-bit probability evaluated at the pilot SNR
    implied by ``a`` (P_pilot = a * P).
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"allocation fraction must be in (0,1), got {a}")
    if not 0.0 < p1 <= 1.0:
        raise ValueError(
            f"p1 must be in (0,1]; p1={p1} cannot generate a key"
        )
    n = params.key_bits
    p_w = dbm_to_w(params.total_power_dbm)
    e_key = (n / p1) * params.tau0_s * a * p_w
    e_data = (n / params.rate_r0) * (1.0 - a) * p_w
    p_out = outage_probability(params, a)
    throughput = params.rate_r0 * (1.0 - p_out)
    e_total = e_key + e_data
    return EnergyReport(
        a=a,
        n_samples=n / p1,
        e_key=e_key,
        e_data=e_data,
        e_total=e_total,
        p_out=p_out,
        throughput=throughput,
        ee=throughput / e_total,
    )


def _ee_at(
    params: SystemParams,
    a: float,
    delta: float,
    ctl: SeriesControl,
    convention: str,
) -> float:
    snr_db = params.pilot_snr_db_for_allocation(a)
    model = derive_correlation(params.with_pilot_snr_db(snr_db))
    quant = make_quantizer(math.sqrt(model.sigma_hat_sq), delta, convention)
    p1 = p1_closed_form(model, quant, ctl)
    return energy_efficiency(params, a, p1).ee


def optimal_allocation(
    params: SystemParams,
    delta: float = 0.1,
    resolution: int = 64,
    ctl: SeriesControl = DEFAULT_CONTROL,
    convention: str = "pdf",
    a_min: float = 0.01,
    a_max: float = 0.99,
) -> tuple[float, float]:
    """Grid search with two local refinement rounds over a in (0, 1).

    P1 is recomputed for every candidate a, since the pilot SNR depends
    on the allocation.
    """
    if resolution < 32:
        raise ValueError(f"resolution must be >= 32, got {resolution}")
    lo, hi = a_min, a_max
    best_a, best_ee = lo, -math.inf
    for _ in range(3):
        step = (hi - lo) / (resolution - 1)
        for i in range(resolution):
            a = lo + i * step
            ee = _ee_at(params, a, delta, ctl, convention)
            if ee > best_ee:
                best_a, best_ee = a, ee
        lo = max(a_min, best_a - step)
        hi = min(a_max, best_a + step)
    return best_a, best_ee
