"""Correlated channel-observation model.

Two parties estimate the same Rayleigh-fading channel with a delay tau
between their measurements and LS-estimation noise on each side. The
derived statistics (rho_d, rho_e, rho, sigma_hat^2, sigma_e^2) feed both
the samplers here and the closed-form analysis.

Pilot-SNR convention: ``pilot_snr_db`` is the *received* pilot SNR
gamma = P_pilot * sigma_h^2 / sigma_n^2, so rho_e = gamma / (gamma + 1)
and the estimation-error variance is sigma_h^2 / gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, fields as dc_fields

import numpy as np

from .specfun import bessel_j0

__all__ = [
    "SystemParams",
    "CorrelationModel",
    "ObservationPair",
    "dbm_to_mw",
    "dbm_to_w",
    "derive_correlation",
    "sample_pair",
    "sample_pairs",
    "sample_trace",
    "load_system_params",
]


def dbm_to_mw(x_dbm: float) -> float:
    """Linear milliwatts from dBm: 10^(x/10)."""
    return 10.0 ** (x_dbm / 10.0)


def dbm_to_w(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the link (defaults: the reference setting)."""

    d: float = 20.0              # Alice-Bob distance [m]
    l: float = 3.5               # path-loss exponent
    noise_dbm: float = -60.0     # noise variance sigma_n^2 [dBm]
    pilot_snr_db: float = 14.0   # received pilot SNR gamma [dB]
    tau_s: float = 0.010         # measurement delay tau [s]
    tau0_s: float = 0.010        # pilot duration tau0 [s]
    v_mps: float = 1.0           # relative speed [m/s]
    f0_hz: float = 1.8e9         # carrier frequency [Hz]
    c_mps: float = 3.0e8         # speed of light [m/s]
    total_power_dbm: float = 10.0  # total power P at Bob [dBm]
    key_bits: int = 64           # required key length N [bits]
    rate_r0: float = 4.0         # fixed data rate R0 [bits/s/Hz]

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if self.l <= 0:
            raise ValueError(f"l must be > 0, got {self.l}")
        if not (self.tau_s >= self.tau0_s >= 0):
            raise ValueError(
                f"need tau_s >= tau0_s >= 0, got tau_s={self.tau_s}, tau0_s={self.tau0_s}"
            )
        if self.v_mps < 0:
            raise ValueError(f"v_mps must be >= 0, got {self.v_mps}")
        if self.key_bits < 1:
            raise ValueError(f"key_bits must be >= 1, got {self.key_bits}")
        if self.rate_r0 <= 0:
            raise ValueError(f"rate_r0 must be > 0, got {self.rate_r0}")
        if self.f0_hz <= 0 or self.c_mps <= 0:
            raise ValueError("f0_hz and c_mps must be > 0")

    @property
    def sigma_h_sq(self) -> float:
        """Average channel gain d^{-l} (linear)."""
        return self.d ** (-self.l)

    def with_pilot_snr_db(self, pilot_snr_db: float) -> "SystemParams":
        return replace(self, pilot_snr_db=pilot_snr_db)

    def pilot_snr_db_for_allocation(self, a: float) -> float:
        """Received pilot SNR [dB] when a fraction ``a`` of P goes to pilots."""
        if not 0.0 < a < 1.0:
            raise ValueError(f"allocation fraction must be in (0,1), got {a}")
        gamma = a * dbm_to_mw(self.total_power_dbm) * self.sigma_h_sq / dbm_to_mw(self.noise_dbm)
        return 10.0 * math.log10(gamma)


@dataclass(frozen=True)
class CorrelationModel:
    """All derived second-order statistics of the two observations."""

    sigma_h_sq: float    # channel variance d^{-l}
    sigma_n_sq: float    # noise variance [mW]
    gamma_pilot: float   # received pilot SNR (linear)
    f_max: float         # maximum Doppler shift [Hz]
    rho_d: float         # delay correlation J0(2 pi f_max tau)
    rho_e: float         # estimation correlation gamma/(gamma+1)
    rho: float           # composite rho_d * rho_e
    sigma_hat_sq: float  # observation variance sigma_h^2 + sigma_h^2/gamma
    sigma_e_sq: float    # equivalent-noise variance (1-rho^2) sigma_hat^2
    sigma_d_sq: float    # delay-term variance (1-rho_d^2) sigma_h^2


@dataclass(frozen=True)
class ObservationPair:
    h_hat_a: complex
    h_hat_b: complex

    @property
    def g_a(self) -> float:
        return abs(self.h_hat_a)

    @property
    def g_b(self) -> float:
        return abs(self.h_hat_b)


def derive_correlation(params: SystemParams) -> CorrelationModel:
    """Build the correlation model from physical parameters."""
    sigma_h_sq = params.sigma_h_sq
    sigma_n_sq = dbm_to_mw(params.noise_dbm)
    gamma = dbm_to_mw(params.pilot_snr_db)  # 10^(dB/10), dimensionless
    f_max = params.v_mps * params.f0_hz / params.c_mps
    rho_d = bessel_j0(2.0 * math.pi * f_max * params.tau_s)
    rho_e = gamma / (gamma + 1.0)
    rho = rho_d * rho_e
    sigma_hat_sq = sigma_h_sq * (1.0 + 1.0 / gamma)
    return CorrelationModel(
        sigma_h_sq=sigma_h_sq,
        sigma_n_sq=sigma_n_sq,
        gamma_pilot=gamma,
        f_max=f_max,
        rho_d=rho_d,
        rho_e=rho_e,
        rho=rho,
        sigma_hat_sq=sigma_hat_sq,
        sigma_e_sq=(1.0 - rho * rho) * sigma_hat_sq,
        sigma_d_sq=(1.0 - rho_d * rho_d) * sigma_h_sq,
    )


def _cn(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with E|z|^2 = variance."""
    scale = math.sqrt(max(variance, 0.0) / 2.0)
    return rng.normal(0.0, 1.0, size=size) * scale + 1j * rng.normal(0.0, 1.0, size=size) * scale


def sample_pairs(
    model: CorrelationModel,
    n: int,
    rng: np.random.Generator,
    route: str = "composed",
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n correlated observation pairs; returns complex (h_a, h_b).

    route="composed" draws h_b = rho*h_a + n_e directly; route="physical"
    builds channel, delay term and both estimation noises separately.
    The two routes share the same joint second-order statistics.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if route == "composed":
        h_a = _cn(rng, model.sigma_hat_sq, n)
        h_b = model.rho * h_a + _cn(rng, model.sigma_e_sq, n)
        return h_a, h_b
    if route == "physical":
        sigma_na_sq = model.sigma_hat_sq - model.sigma_h_sq
        h = _cn(rng, model.sigma_h_sq, n)
        h_delay = model.rho_d * h + _cn(rng, model.sigma_d_sq, n)
        h_a = h + _cn(rng, sigma_na_sq, n)
        h_b = h_delay + _cn(rng, sigma_na_sq, n)
        return h_a, h_b
    raise ValueError(f"unknown route {route!r}")


def sample_pair(
    model: CorrelationModel, rng: np.random.Generator, route: str = "composed"
) -> ObservationPair:
    h_a, h_b = sample_pairs(model, 1, rng, route=route)
    return ObservationPair(complex(h_a[0]), complex(h_b[0]))


def sample_trace(
    model: CorrelationModel,
    count: int,
    sample_interval_s: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Time-correlated sequence of observation pairs (complex arrays).

    The true channel follows an AR(1) process whose per-step coefficient
    matches the Jakes lag-1 autocorrelation J0(2 pi f_max dt); each pair
    is then formed exactly as in sample_pairs (physical route), so the
    marginal statistics of every pair match sample_pair.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if sample_interval_s <= 0:
        raise ValueError(f"sample_interval_s must be > 0, got {sample_interval_s}")
    r = bessel_j0(2.0 * math.pi * model.f_max * sample_interval_s)
    innov = _cn(rng, (1.0 - r * r) * model.sigma_h_sq, count)
    h = np.empty(count, dtype=complex)
    h[0] = _cn(rng, model.sigma_h_sq, 1)[0]
    for k in range(1, count):
        h[k] = r * h[k - 1] + innov[k]
    sigma_na_sq = model.sigma_hat_sq - model.sigma_h_sq
    h_delay = model.rho_d * h + _cn(rng, model.sigma_d_sq, count)
    h_a = h + _cn(rng, sigma_na_sq, count)
    h_b = h_delay + _cn(rng, sigma_na_sq, count)
    return h_a, h_b


_FLOAT_KEYS = {
    "d", "l", "noise_dbm", "pilot_snr_db", "tau_s", "tau0_s",
    "v_mps", "f0_hz", "c_mps", "total_power_dbm", "rate_r0",
}
_INT_KEYS = {"key_bits"}


def parse_kv_file(path: str) -> dict[str, str]:
    """Flat key=value file: one pair per line, '#' comments, blank lines ok."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def load_system_params(path: str) -> SystemParams:
    """Load SystemParams from a flat key=value configuration file."""
    raw = parse_kv_file(path)
    known = {f.name for f in dc_fields(SystemParams)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown SystemParams key(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, float | int] = {}
    for key, value in raw.items():
        kwargs[key] = int(value) if key in _INT_KEYS else float(value)
    return SystemParams(**kwargs)
