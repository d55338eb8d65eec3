"""Parameter algebra, the conditional log-volatility recursion, and the
quasi-likelihood objective.

The structural (continuous-time) parameters map onto the estimable GARCH-form
parameters through the exponential-moment coefficients of exp(beta*s):

    rho1 = (e^b - 1)/b,  rho2 = (e^b - 1 - b)/b^2,  rho3 = (e^b - 1 - b - b^2/2)/b^3,
    rho  = rho1 + (gamma - 1) rho2.

Near b = 0 the closed forms cancel catastrophically (rho3 loses ~|b|^-2
digits even through expm1), so the everywhere-convergent factorial series
takes over below |b| = 0.08, where nine terms already reach 1e-16.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "InitPolicy",
    "StructuralParams",
    "RhoCoefficients",
    "GarchParams",
    "HPath",
    "rho_coefficients",
    "beta_star",
    "structural_to_garch",
    "omega_star",
    "h_recursion",
    "quasi_likelihood",
    "long_run_mean",
    "floor_rv",
    "RV_FLOOR",
]

RV_FLOOR = 1e-12
_SERIES_THRESHOLD = 0.08
_H_OVERFLOW = 700.0


class InitPolicy(enum.Enum):
    """Initialization of the log conditional volatility recursion."""

    FIRST_LOG_RV = "first_log_rv"
    LONG_RUN_MEAN = "long_run_mean"


@dataclass(frozen=True)
class RhoCoefficients:
    rho1: float
    rho2: float
    rho3: float
    rho: float


def _rho_closed(beta: float):
    em1 = math.expm1(beta)
    r1 = em1 / beta
    r2 = (em1 - beta) / beta**2
    r3 = (em1 - beta - beta**2 / 2.0) / beta**3
    return r1, r2, r3


def _rho_series(beta: float):
    # rho_k = sum_{j>=0} beta^j / (j+k)!; truncation below the switch
    # threshold (0.08) is under 1e-16 with terms through beta^8
    r1 = r2 = r3 = 0.0
    bj = 1.0
    for j in range(9):
        r1 += bj / math.factorial(j + 1)
        r2 += bj / math.factorial(j + 2)
        r3 += bj / math.factorial(j + 3)
        bj *= beta
    return r1, r2, r3


def rho_coefficients(beta: float, gamma: float) -> RhoCoefficients:
    """Exponential-moment coefficients and their gamma-weighted combination."""
    if not abs(beta) < 1.0:
        raise ValueError(f"|beta| must be < 1, got {beta}")
    if abs(beta) < _SERIES_THRESHOLD:
        r1, r2, r3 = _rho_series(beta)
    else:
        r1, r2, r3 = _rho_closed(beta)
    return RhoCoefficients(rho1=r1, rho2=r2, rho3=r3, rho=r1 + (gamma - 1.0) * r2)


def beta_star(beta: float) -> float:
    """Adjustment coefficient (1 + beta*rho2) / (rho2 - 2*rho3)."""
    rc = rho_coefficients(beta, 0.0)
    denom = rc.rho2 - 2.0 * rc.rho3
    if abs(denom) < 1e-14:
        raise ValueError("rho2 - 2*rho3 vanishes; beta_star undefined")
    return (1.0 + beta * rc.rho2) / denom


@dataclass(frozen=True)
class StructuralParams:
    """Continuous-time model parameters (omega, gamma, beta, nu).

    ``beta_star`` is derived, never stored independently.
    """

    omega: float
    gamma: float
    beta: float
    nu: float

    def __post_init__(self):
        if not abs(self.beta) < 1.0:
            raise ValueError(f"|beta| must be < 1, got {self.beta}")

    @property
    def beta_star(self) -> float:
        return beta_star(self.beta)


@dataclass(frozen=True)
class GarchParams:
    """Estimable parameter vector of the log-IV recursion."""

    omega_g: float
    gamma: float
    beta_g: float

    def __post_init__(self):
        if not abs(self.gamma) < 1.0:
            raise ValueError(f"|gamma| must be < 1, got {self.gamma}")
        if not abs(self.beta_g) < 1.0:
            raise ValueError(f"|beta_g| must be < 1, got {self.beta_g}")
        if not abs(self.gamma + self.beta_g) < 1.0:
            raise ValueError(
                f"|gamma + beta_g| must be < 1 (stationarity), got "
                f"{self.gamma + self.beta_g}")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega_g, self.gamma, self.beta_g])


@dataclass
class HPath:
    values: np.ndarray
    init_policy: InitPolicy


def omega_star(theta: StructuralParams) -> float:
    """Intercept of the log-IV recursion before the martingale-moment shift."""
    rc = rho_coefficients(theta.beta, theta.gamma)
    return ((1.0 - theta.gamma) * rc.rho2 + rc.rho) * theta.omega \
        + (1.0 - theta.gamma) * theta.nu * (rc.rho2 - 2.0 * rc.rho3)


def structural_to_garch(theta: StructuralParams, log_mgf_D: float) -> GarchParams:
    """Map structural parameters to the GARCH-form vector.

    ``log_mgf_D`` is log E[exp(D_n)], supplied by the simulator's Monte-Carlo
    estimate (or 0 when nu = 0 makes D degenerate).
    """
    if not math.isfinite(log_mgf_D):
        raise ValueError("log_mgf_D must be finite")
    rc = rho_coefficients(theta.beta, theta.gamma)
    w_star = omega_star(theta)
    omega_g = w_star + (1.0 - theta.gamma) * log_mgf_D
    beta_g = rc.rho * theta.beta
    if not abs(theta.gamma + beta_g) < 1.0:
        raise ValueError(
            "resulting parameters violate stationarity |gamma + beta_g| < 1; "
            "non-stationary structural configuration")
    return GarchParams(omega_g=omega_g, gamma=theta.gamma, beta_g=beta_g)


def _initial_h(params: GarchParams, log_rv: np.ndarray, policy: InitPolicy) -> float:
    if policy is InitPolicy.FIRST_LOG_RV:
        return float(log_rv[0])
    return long_run_mean_log(params)


def long_run_mean_log(params: GarchParams) -> float:
    """omega_g / (1 - gamma - beta_g), the stationary mean of the recursion."""
    denom = 1.0 - params.gamma - params.beta_g
    if abs(denom) < 1e-12:
        raise ValueError("1 - gamma - beta_g is numerically zero")
    return params.omega_g / denom


# short public alias: the recursion's theoretical average value
long_run_mean = long_run_mean_log


def h_recursion(params: GarchParams, log_rv: np.ndarray,
                policy: InitPolicy = InitPolicy.FIRST_LOG_RV) -> HPath:
    """Log conditional volatility path H_i = w + g*H_{i-1} + b*log RV_{i-1}."""
    log_rv = np.asarray(log_rv, dtype=float)
    if log_rv.ndim != 1 or log_rv.size == 0:
        raise ValueError("log_rv must be a non-empty 1-d sequence")
    if not np.isfinite(log_rv).all():
        raise ValueError("log_rv contains non-finite values")
    h = np.empty_like(log_rv)
    h[0] = _initial_h(params, log_rv, policy)
    if log_rv.size > 1:
        drive = params.omega_g + params.beta_g * log_rv[:-1]
        # H_i = drive_{i-1} + gamma * H_{i-1}: first-order linear filter
        h[1:], _ = lfilter([1.0], [1.0, -params.gamma], drive,
                           zi=np.array([params.gamma * h[0]]))
    return HPath(values=h, init_policy=policy)


def quasi_likelihood(params: GarchParams, rv: np.ndarray,
                     policy: InitPolicy = InitPolicy.FIRST_LOG_RV) -> float:
    """Quasi-likelihood -(1/n) sum_i { H_i + RV_i * exp(-H_i) }.

    Returns -inf when any |H_i| exceeds the overflow bound, so optimizers
    reject wild parameter proposals instead of overflowing exp().
    """
    rv = np.asarray(rv, dtype=float)
    if rv.size == 0:
        raise ValueError("rv must be non-empty")
    if (rv <= 0).any():
        raise ValueError("rv must be strictly positive (apply floor_rv upstream)")
    h = h_recursion(params, np.log(rv), policy).values
    if np.abs(h).max() > _H_OVERFLOW:
        return -math.inf
    return float(-np.mean(h + rv * np.exp(-h)))


def floor_rv(rv: np.ndarray, floor: float = RV_FLOOR):
    """Clamp non-positive realized-variance values; returns (floored, count)."""
    rv = np.asarray(rv, dtype=float)
    bad = rv < floor
    n_clamped = int(bad.sum())
    if n_clamped:
        rv = rv.copy()
        rv[bad] = floor
    return rv, n_clamped
