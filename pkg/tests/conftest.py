import numpy as np
import pytest
from scipy.integrate import quad

from ergi.core import GarchParams


def spectral_log_mgf(beta: float, nu: float, n_nodes: int = 2000):
    """Independent oracle for log E[exp(D)]: Fredholm-determinant route.

    Integration by parts turns the stochastic integral into a Gaussian
    quadratic form int q(u) W_u^2 du with q(u) = nu (1-u) e^{beta (1-u)};
    its moment generating function is a product over the eigenvalues of the
    covariance-weighted kernel sqrt(q(s)q(t)) min(s,t).
    """
    if nu == 0.0:
        return 0.0, 0.0
    f = lambda s: s * np.exp(beta * s) / beta - np.expm1(beta * s) / beta**2
    C = quad(f, 0.0, 1.0)[0]
    m = (np.arange(n_nodes) + 0.5) / n_nodes
    sq = np.sqrt(nu * (1.0 - m) * np.exp(beta * (1.0 - m)))
    kern = np.minimum.outer(m, m) * np.outer(sq, sq) / n_nodes
    lam = np.linalg.eigvalsh(kern)
    assert lam.max() < 0.5, "E[exp(D)] diverges for these parameters"
    return float(-nu * C - 0.5 * np.sum(np.log1p(-2.0 * lam))), float(lam.max())


def synth_log_iv(theta: GarchParams, n: int, noise_sd: float, seed: int,
                 burn: int = 100) -> np.ndarray:
    """Measurement-error-free log-IV path: the recursion driven by itself plus
    a mean-one lognormal multiplicative innovation of the given log-sd."""
    rng = np.random.default_rng(np.random.Philox(key=seed))
    lm = rng.normal(-0.5 * noise_sd**2, noise_sd, n + burn)
    h = theta.omega_g / (1.0 - theta.gamma - theta.beta_g)
    out = np.empty(n + burn)
    for i in range(n + burn):
        out[i] = h + lm[i]
        h = theta.omega_g + theta.gamma * h + theta.beta_g * out[i]
    return out[burn:]


@pytest.fixture(scope="session")
def paper_truth():
    return GarchParams(0.3207, 0.3, 0.4405)
