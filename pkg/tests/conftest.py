"""Shared independent oracles for the test suite.

These deliberately avoid the library's own series code paths: Marcum Q
is integrated directly, and the event probabilities are 2-D adaptive
quadrature of the bivariate Rayleigh density.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special

from plkg.channel import CorrelationModel


def marcum_q1_oracle(a: float, b: float) -> float:
    """Direct integral of the Rician tail: int_b^inf t e^{-(t^2+a^2)/2} I0(at) dt."""
    if b == 0.0:
        return 1.0

    def integrand(t):
        # i0e keeps the product bounded: e^{-(t-a)^2/2} * i0e(a t)
        return t * math.exp(-((t - a) ** 2) / 2.0) * special.i0e(a * t)

    val, _ = integrate.quad(integrand, b, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val


def joint_pdf(alpha, beta, rho, sigma_hat_sq):
    """Bivariate Rayleigh density of the two observed amplitudes."""
    c = (1.0 - rho * rho) * sigma_hat_sq
    z = 2.0 * abs(rho) * alpha * beta / c
    return (
        4.0 * alpha * beta / (c * sigma_hat_sq)
        * np.exp(-(alpha * alpha + beta * beta) / c + z)
        * special.i0e(z)
    )


def quad_event_probs(rho, sigma_hat_sq, gamma_l, gamma_u):
    """(P1, P2) by 2-D adaptive quadrature of the joint density."""
    upper = 8.0 * math.sqrt(sigma_hat_sq)  # Rayleigh tail beyond is < 1e-27

    def f(a, b):
        return joint_pdf(a, b, rho, sigma_hat_sq)

    opts = dict(epsabs=1e-12, epsrel=1e-12)
    p_ll, _ = integrate.dblquad(f, 0.0, gamma_l, 0.0, gamma_l, **opts)
    p_uu, _ = integrate.dblquad(f, gamma_u, upper, gamma_u, upper, **opts)
    p_lu, _ = integrate.dblquad(f, 0.0, gamma_l, gamma_u, upper, **opts)
    return p_ll + p_uu, 2.0 * p_lu


def toy_model(rho: float, sigma_hat_sq: float = 1.0) -> CorrelationModel:
    """Correlation model with the composite rho set directly."""
    return CorrelationModel(
        sigma_h_sq=sigma_hat_sq,
        sigma_n_sq=1.0,
        gamma_pilot=math.inf,
        f_max=0.0,
        rho_d=1.0,
        rho_e=rho,
        rho=rho,
        sigma_hat_sq=sigma_hat_sq,
        sigma_e_sq=(1.0 - rho * rho) * sigma_hat_sq,
        sigma_d_sq=0.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
