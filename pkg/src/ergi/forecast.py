"""One-day-ahead volatility forecasting, benchmark models, rolling backtests,
and forecast-comparison statistics.

Benchmarks follow the usual conventions: the linear realized GARCH filters
the variance level itself (h = w + g h + b RV), the heterogeneous
autoregression regresses RV on daily/weekly/monthly averages (lags 1, 5, 22),
and the returns-based GARCH(1,1) uses squared daily open-to-close returns as
innovations.  All quasi-likelihoods are Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.stats import norm

from .core import floor_rv, h_recursion
from .qmle import FitResult, OptimizerConfig, fit_qmle

__all__ = [
    "MODEL_TAGS",
    "ForecastSeries",
    "DmResult",
    "BenchmarkFit",
    "forecast_ergi",
    "fit_realized_garch_linear",
    "fit_har",
    "fit_ugarch",
    "rolling_backtest",
    "mspe",
    "rmspe",
    "osr",
    "dm_test",
    "rank_table",
]

MODEL_TAGS = ("ERGI", "RealGARCH", "HAR", "UGARCH", "MeanRV")


@dataclass
class ForecastSeries:
    model_tag: str
    horizon_days: np.ndarray
    forecasts: np.ndarray
    realized: np.ndarray

    def __post_init__(self):
        self.horizon_days = np.asarray(self.horizon_days, dtype=int)
        self.forecasts = np.asarray(self.forecasts, dtype=float)
        self.realized = np.asarray(self.realized, dtype=float)
        if not (len(self.horizon_days) == len(self.forecasts) == len(self.realized)):
            raise ValueError("forecast series components must align")

    def errors(self) -> np.ndarray:
        return self.forecasts - self.realized


@dataclass
class DmResult:
    statistic: float
    p_less: float
    p_greater: float
    n_used: int


@dataclass
class BenchmarkFit:
    params: dict
    forecast: float
    converged: bool
    flags: list = field(default_factory=list)


def forecast_ergi(fit: FitResult, rv: np.ndarray) -> float:
    """exp(H_{n+1}) from the fitted recursion run through the sample."""
    rv = np.asarray(rv, dtype=float)
    if (rv <= 0).any():
        raise ValueError("rv must be positive")
    p = fit.theta_hat
    h = h_recursion(p, np.log(rv), fit.init_policy).values
    h_next = p.omega_g + p.gamma * h[-1] + p.beta_g * math.log(rv[-1])
    if abs(h_next) > 700.0:
        raise OverflowError("forecast log-variance exceeds the overflow bound")
    return math.exp(h_next)


# ---------------------------------------------------------------------------
# linear realized GARCH benchmark
# ---------------------------------------------------------------------------

def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def fit_realized_garch_linear(rv: np.ndarray) -> BenchmarkFit:
    """Gaussian QMLE of h_i = w + g h_{i-1} + b RV_{i-1} with h_1 = RV_1.

    Positivity and stationarity hold by construction: the level and the
    persistence split are optimized through (log-level, logit, logit).
    """
    rv = np.asarray(rv, dtype=float)
    if rv.size < 30:
        raise ValueError("need at least 30 observations")
    if (rv <= 0).any():
        raise ValueError("rv must be positive")
    level = float(np.mean(rv))

    def unpack(u):
        p = _sigmoid(u[1]) * (1.0 - 1e-6)
        s = _sigmoid(u[2])
        g = p * s
        b = p * (1.0 - s)
        w = math.exp(min(max(u[0], -700.0), 700.0)) * (1.0 - p)
        return w, g, b

    def filter_h(w, g, b):
        h = np.empty_like(rv)
        h[0] = rv[0]
        h[1:], _ = lfilter([1.0], [1.0, -g], w + b * rv[:-1],
                           zi=np.array([g * h[0]]))
        return h

    def nll(u):
        w, g, b = unpack(u)
        h = filter_h(w, g, b)
        if (h <= 0).any():
            return 1e10
        return float(np.mean(np.log(h) + rv / h))

    best = None
    for s0 in (0.0, 1.5, -1.5):
        u0 = np.array([math.log(level), 1.0, s0])
        res = minimize(nll, u0, method="Nelder-Mead",
                       options={"maxiter": 2000, "fatol": 1e-10, "xatol": 1e-8})
        if best is None or res.fun < best.fun:
            best = res
    w, g, b = unpack(best.x)
    h = filter_h(w, g, b)
    fc = w + g * h[-1] + b * rv[-1]
    return BenchmarkFit(params={"omega": w, "gamma": g, "beta": b},
                        forecast=float(fc), converged=bool(best.success))


# ---------------------------------------------------------------------------
# heterogeneous autoregression benchmark
# ---------------------------------------------------------------------------

_HAR_LAGS = (1, 5, 22)


def fit_har(rv: np.ndarray) -> BenchmarkFit:
    """OLS of RV_t on [1, RV_{t-1}, mean(last 5), mean(last 22)]."""
    rv = np.asarray(rv, dtype=float)
    if rv.size < 60:
        raise ValueError("need at least 60 observations")
    lmax = _HAR_LAGS[-1]
    n = rv.size
    rows = n - lmax
    X = np.empty((rows, 4))
    X[:, 0] = 1.0
    csum = np.concatenate([[0.0], np.cumsum(rv)])
    for j, lag in enumerate(_HAR_LAGS):
        # mean of rv[t-lag .. t-1] for t = lmax..n-1
        t = np.arange(lmax, n)
        X[:, 1 + j] = (csum[t] - csum[t - lag]) / lag
    y = rv[lmax:]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    flags = [] if rank == 4 else ["rank_deficient"]
    t = n
    latest = np.array([1.0] + [(csum[t] - csum[t - lag]) / lag for lag in _HAR_LAGS])
    fc = float(latest @ coef)
    return BenchmarkFit(params={"coef": coef}, forecast=fc,
                        converged=True, flags=flags)


# ---------------------------------------------------------------------------
# returns-based GARCH(1,1) benchmark
# ---------------------------------------------------------------------------

def fit_ugarch(daily_returns: np.ndarray) -> BenchmarkFit:
    """GARCH(1,1) on open-to-close returns: h_i = w + g h_{i-1} + a r_{i-1}^2."""
    r = np.asarray(daily_returns, dtype=float)
    if r.size < 60:
        raise ValueError("need at least 60 observations")
    v = float(np.var(r))
    if v <= 0:
        raise ValueError("zero-variance input")

    def unpack(u):
        p = _sigmoid(u[1]) * (1.0 - 1e-6)
        s = _sigmoid(u[2])
        g = p * s
        a = p * (1.0 - s)
        w = math.exp(min(max(u[0], -700.0), 700.0)) * (1.0 - p)
        return w, g, a

    r2 = r * r

    def filter_h(w, g, a):
        h = np.empty_like(r)
        h[0] = v
        h[1:], _ = lfilter([1.0], [1.0, -g], w + a * r2[:-1],
                           zi=np.array([g * h[0]]))
        return h

    def nll(u):
        w, g, a = unpack(u)
        h = filter_h(w, g, a)
        if (h <= 0).any():
            return 1e10
        return float(np.mean(np.log(h) + r2 / h))

    best = None
    for s0 in (1.5, 0.0, 3.0):
        u0 = np.array([math.log(v), 2.0, s0])
        res = minimize(nll, u0, method="Nelder-Mead",
                       options={"maxiter": 2000, "fatol": 1e-10, "xatol": 1e-8})
        if best is None or res.fun < best.fun:
            best = res
    w, g, a = unpack(best.x)
    h = filter_h(w, g, a)
    fc = w + g * h[-1] + a * r2[-1]
    return BenchmarkFit(params={"omega": w, "gamma": g, "alpha": a},
                        forecast=float(fc), converged=bool(best.success))


# ---------------------------------------------------------------------------
# rolling backtest
# ---------------------------------------------------------------------------

def _one_step_forecast(tag: str, rv_win: np.ndarray, ret_win, qcfg: OptimizerConfig):
    if tag == "ERGI":
        fit = fit_qmle(rv_win, qcfg)
        return forecast_ergi(fit, rv_win)
    if tag == "RealGARCH":
        return fit_realized_garch_linear(rv_win).forecast
    if tag == "HAR":
        return fit_har(rv_win).forecast
    if tag == "UGARCH":
        if ret_win is None:
            raise ValueError("UGARCH requires a returns series")
        return fit_ugarch(ret_win).forecast
    if tag == "MeanRV":
        return float(np.mean(rv_win))
    raise ValueError(f"unknown model tag {tag!r}")


def rolling_backtest(rv: np.ndarray, returns: np.ndarray | None, window: int,
                     models: list | tuple = MODEL_TAGS,
                     refit_every: int = 1,
                     qmle_config: OptimizerConfig | None = None):
    """One-step-ahead rolling-window forecasts for each requested model.

    Day t is forecast from days (t-window, ..., t-1]; models are refit every
    ``refit_every`` out-of-sample days, re-filtering the newest window with
    carried parameters in between.  Failed fits are recorded per day and the
    day is skipped for that model.

    Returns (list of (tag, ForecastSeries), failures dict).
    """
    rv = np.asarray(rv, dtype=float)
    rv, _ = floor_rv(rv)
    n = rv.size
    if n <= window + 1 - 1:
        raise ValueError("series must be longer than window + 1")
    if returns is not None:
        returns = np.asarray(returns, dtype=float)
        if returns.size != n:
            raise ValueError("returns must align with rv")
    qcfg = qmle_config or OptimizerConfig()
    out = []
    failures = {}
    for k, tag in enumerate(models):
        label = tag if tag not in [t for t, _ in out] else f"{tag}#{k}"
        days, fcs, real = [], [], []
        fails = []
        cached = None
        for j, t in enumerate(range(window, n)):
            rv_win = rv[t - window:t]
            ret_win = returns[t - window:t] if returns is not None else None
            try:
                if refit_every > 1 and j % refit_every != 0 and cached is not None:
                    fc = _carry_forward(tag, cached, rv_win, ret_win)
                else:
                    fc = _one_step_forecast(tag, rv_win, ret_win, qcfg)
                    cached = _snapshot(tag, rv_win, ret_win, qcfg)
            except Exception as exc:  # per-day failure: record and continue
                fails.append((t, str(exc)))
                continue
            days.append(t)
            fcs.append(fc)
            real.append(rv[t])
        out.append((label, ForecastSeries(label, np.array(days, dtype=int),
                                          np.array(fcs), np.array(real))))
        failures[label] = fails
    return out, failures


def _snapshot(tag, rv_win, ret_win, qcfg):
    if tag == "ERGI":
        return fit_qmle(rv_win, qcfg)
    if tag == "RealGARCH":
        return fit_realized_garch_linear(rv_win)
    if tag == "UGARCH":
        return fit_ugarch(ret_win)
    return None


def _carry_forward(tag, cached, rv_win, ret_win):
    """Forecast from the newest window with previously fitted parameters."""
    if tag == "ERGI":
        return forecast_ergi(cached, rv_win)
    if tag == "RealGARCH":
        p = cached.params
        h = rv_win[0]
        for i in range(1, rv_win.size):
            h = p["omega"] + p["gamma"] * h + p["beta"] * rv_win[i - 1]
        return p["omega"] + p["gamma"] * h + p["beta"] * rv_win[-1]
    if tag == "UGARCH":
        p = cached.params
        h = float(np.var(ret_win))
        for i in range(1, ret_win.size):
            h = p["omega"] + p["gamma"] * h + p["alpha"] * ret_win[i - 1] ** 2
        return p["omega"] + p["gamma"] * h + p["alpha"] * ret_win[-1] ** 2
    if tag == "HAR":
        return fit_har(rv_win).forecast
    return float(np.mean(rv_win))


# ---------------------------------------------------------------------------
# comparison metrics
# ---------------------------------------------------------------------------

def mspe(f: ForecastSeries) -> float:
    if f.forecasts.size == 0:
        raise ValueError("empty forecast series")
    return float(np.mean((f.forecasts - f.realized) ** 2))


def rmspe(f: ForecastSeries) -> float:
    if f.forecasts.size == 0:
        raise ValueError("empty forecast series")
    if (f.realized <= 1e-12).any():
        raise ValueError("realized values must exceed 1e-12")
    return float(np.mean(((f.forecasts - f.realized) / f.realized) ** 2))


def osr(candidate: ForecastSeries, competitor: ForecastSeries) -> float:
    """Out-of-sample R-square of the candidate against the competitor."""
    if not np.array_equal(candidate.horizon_days, competitor.horizon_days):
        raise ValueError("series must cover the same out-of-sample days")
    if not np.allclose(candidate.realized, competitor.realized):
        raise ValueError("realized targets must agree")
    denom = float(np.sum((competitor.realized - competitor.forecasts) ** 2))
    if denom == 0.0:
        raise ZeroDivisionError("competitor has zero squared error")
    num = float(np.sum((candidate.realized - candidate.forecasts) ** 2))
    return 1.0 - num / denom


def dm_test(e_star: np.ndarray, e: np.ndarray) -> DmResult:
    """Diebold-Mariano test on the loss differential d = e*^2 - e^2.

    The long-run variance uses Newey-West (Bartlett) weights with lag
    floor(n^(1/3)).  p_less tests "candidate better" (E[d] < 0), p_greater
    the reverse.
    """
    e_star = np.asarray(e_star, dtype=float)
    e = np.asarray(e, dtype=float)
    if e_star.shape != e.shape or e_star.ndim != 1:
        raise ValueError("error series must be 1-d and aligned")
    n = e_star.size
    if n < 10:
        raise ValueError("need at least 10 loss differentials")
    d = e_star**2 - e**2
    if np.allclose(d, 0.0):
        raise ValueError("identical forecasts: zero-variance loss differential")
    dbar = d.mean()
    dc = d - dbar
    lag = int(np.floor(n ** (1.0 / 3.0)))
    lrv = float(np.dot(dc, dc)) / n
    for j in range(1, lag + 1):
        gamma_j = float(np.dot(dc[j:], dc[:-j])) / n
        lrv += 2.0 * (1.0 - j / (lag + 1.0)) * gamma_j
    if lrv <= 0:
        raise ValueError("non-positive long-run variance estimate")
    stat = dbar / math.sqrt(lrv / n)
    return DmResult(statistic=float(stat),
                    p_less=float(norm.cdf(stat)),
                    p_greater=float(norm.sf(stat)),
                    n_used=n)


def rank_table(series: list, relative: bool = False):
    """Per-day accuracy ranks (1 = best) across aligned forecast series.

    Returns (tags, average rank per model, first-rank counts per model).
    With ``relative`` ranks use squared relative errors.
    """
    tags = [t for t, _ in series]
    days = series[0][1].horizon_days
    for _, f in series[1:]:
        if not np.array_equal(f.horizon_days, days):
            raise ValueError("series must cover the same days for ranking")
    losses = []
    for _, f in series:
        e = f.forecasts - f.realized
        losses.append((e / f.realized) ** 2 if relative else e**2)
    L = np.vstack(losses)                      # (models, days)
    order = np.argsort(np.argsort(L, axis=0), axis=0) + 1
    avg_rank = order.mean(axis=1)
    first = (order == 1).sum(axis=1)
    return tags, avg_rank, first
