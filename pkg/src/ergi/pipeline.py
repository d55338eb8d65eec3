"""File formats, configuration, and experiment orchestration.

All CSV outputs are UTF-8, comma-delimited with a header row and a trailing
``#``-prefixed metadata comment recording the package version, the seed, and
a hash of the effective configuration.  Readers skip ``#`` lines anywhere.

The experiment configuration is a key = value sections file (INI syntax);
unknown sections or keys are rejected so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import math
import os
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.stats import norm

from . import __version__
from .core import GarchParams, InitPolicy, StructuralParams, floor_rv
from .forecast import (MODEL_TAGS, ForecastSeries, dm_test, forecast_ergi,
                       fit_realized_garch_linear, mspe, osr, rank_table,
                       rmspe, rolling_backtest)
from .prv import TickDay, jump_robust_prv
from .qmle import FitResult, OptimizerConfig, fit_qmle, z_statistics
from .simulate import SimConfig, simulate_batch, noisy_obs_batch

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "ExperimentConfig",
    "load_config",
    "write_tick_file",
    "read_tick_file",
    "write_rv_series",
    "read_rv_series",
    "write_returns",
    "read_returns",
    "serialize_fit",
    "parse_fit",
    "cmd_simulate",
    "cmd_rv",
    "cmd_fit",
    "cmd_mc_study",
    "cmd_backtest",
    "cmd_full_study",
]


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Malformed or unusable input data (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """Numerical failure in simulation or estimation (CLI exit code 4)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    # [simulation]
    n_days: int = 100
    grid_steps_per_day: int = 11700
    obs_per_day: int = 390
    noise_ratio: float = 0.01
    jump_intensity: float = 10.0
    jump_abs_size: float = 0.05
    burn_in_days: int = 10
    # [params]
    omega: float = -0.1
    gamma: float = 0.3
    beta: float = 0.5
    nu: float = 2.0
    # [rv]
    c_tau_multiplier: float = 4.0
    # [fit]
    multistart_count: int = 8
    tolerance: float = 1e-8
    max_iterations: int = 2000
    init_policy: str = "first_log_rv"
    omega_bound: float = 10.0
    gamma_bound: float = 0.999
    beta_bound: float = 0.999
    # [mc]
    replications: int = 100
    n_list: tuple = (100, 200, 500)
    m_list: tuple = (390, 1170)
    mgf_replications: int = 100_000
    # [backtest]
    window: int = 500
    models: tuple = MODEL_TAGS
    refit_every: int = 1
    # [output]
    seed: int = 20260808
    out_dir: str = "out"

    def sim_config(self, n_days: int | None = None, obs: int | None = None,
                   seed: int | None = None) -> SimConfig:
        return SimConfig(
            n_days=n_days or self.n_days,
            grid_steps_per_day=self.grid_steps_per_day,
            obs_per_day=obs or self.obs_per_day,
            noise_ratio=self.noise_ratio,
            jump_intensity=self.jump_intensity,
            jump_abs_size=self.jump_abs_size,
            seed=self.seed if seed is None else seed,
            burn_in_days=self.burn_in_days,
        )

    def structural(self) -> StructuralParams:
        return StructuralParams(omega=self.omega, gamma=self.gamma,
                                beta=self.beta, nu=self.nu)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            omega_high=self.omega_bound,
            gamma_high=self.gamma_bound,
            beta_high=self.beta_bound,
            multistart_count=self.multistart_count,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            init_policy=InitPolicy(self.init_policy),
        )

    def hash(self) -> str:
        payload = "|".join(f"{f.name}={getattr(self, f.name)!r}"
                           for f in fields(self))
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def paper_scale(self) -> "ExperimentConfig":
        """Restore the full published study scale (500 replications, all m)."""
        return replace(self, replications=500, n_list=(100, 200, 500),
                       m_list=(390, 1170, 11700), mgf_replications=1_000_000)


_SCHEMA = {
    "simulation": {"n_days": int, "grid_steps_per_day": int, "obs_per_day": int,
                   "noise_ratio": float, "jump_intensity": float,
                   "jump_abs_size": float, "burn_in_days": int},
    "params": {"omega": float, "gamma": float, "beta": float, "nu": float},
    "rv": {"c_tau_multiplier": float},
    "fit": {"multistart_count": int, "tolerance": float, "max_iterations": int,
            "init_policy": str, "omega_bound": float, "gamma_bound": float,
            "beta_bound": float},
    "mc": {"replications": int, "n_list": "int_list", "m_list": "int_list",
           "mgf_replications": int},
    "backtest": {"window": int, "models": "str_list", "refit_every": int},
    "output": {"seed": int, "out_dir": str},
}


def load_config(path: str | None) -> ExperimentConfig:
    """Parse a sections/key = value config file; unknown keys are errors."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kind = _SCHEMA[section][key]
            try:
                if kind == "int_list":
                    values[key] = tuple(int(x) for x in raw.split(",") if x.strip())
                elif kind == "str_list":
                    values[key] = tuple(x.strip() for x in raw.split(",") if x.strip())
                elif kind is int:
                    values[key] = int(raw)
                elif kind is float:
                    values[key] = float(raw)
                else:
                    values[key] = raw.strip()
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {key!r} in [{section}]: {raw!r}") from exc
    cfg = replace(cfg, **values)
    try:
        InitPolicy(cfg.init_policy)
    except ValueError as exc:
        raise ConfigError(f"unknown init_policy {cfg.init_policy!r}") from exc
    for tag in cfg.models:
        if tag not in MODEL_TAGS:
            raise ConfigError(f"unknown model tag {tag!r}; choose from {MODEL_TAGS}")
    if cfg.replications < 1:
        raise ConfigError("replications must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# CSV primitives
# ---------------------------------------------------------------------------

def _meta_line(cfg_hash: str, seed: int) -> str:
    return f"# version={__version__} seed={seed} config_hash={cfg_hash}"


def _write_csv(path: str, header: list, rows, cfg_hash: str, seed: int):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
        fh.write(_meta_line(cfg_hash, seed) + "\n")


def _read_csv_rows(path: str, expected_header: list):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"input file not found: {path}") from exc
    with fh:
        header = None
        reader = csv.reader(fh)
        for parts in reader:
            lineno = reader.line_num
            if not parts or (parts[0] or "").startswith("#"):
                continue
            if header is None:
                header = parts
                if header != expected_header:
                    raise DataError(
                        f"{path}:{lineno}: expected header "
                        f"{','.join(expected_header)!r}, got {parts!r}")
                continue
            if len(parts) != len(expected_header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(expected_header)} "
                    f"fields, got {len(parts)}")
            yield lineno, parts


# --- tick files -------------------------------------------------------------

TICK_HEADER = ["day", "timestamp", "log_price"]


def write_tick_file(path: str, days: list, cfg_hash: str, seed: int):
    """days: iterable of (day_index, timestamps, log_prices)."""
    def rows():
        for day_index, ts, lp in days:
            for t, p in zip(ts, lp):
                yield (day_index, repr(float(t)), repr(float(p)))
    _write_csv(path, TICK_HEADER, rows(), cfg_hash, seed)


def read_tick_file(path: str) -> list:
    """Returns a list of TickDay, sorted by day index."""
    per_day = {}
    last = None
    for lineno, parts in _read_csv_rows(path, TICK_HEADER):
        try:
            day = int(parts[0])
            t = float(parts[1])
            p = float(parts[2])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: unparsable row {parts!r}") from exc
        if not (0.0 <= t < 1.0):
            raise DataError(f"{path}:{lineno}: timestamp {t} outside [0, 1)")
        key = (day, t)
        if last is not None and key <= last:
            raise DataError(f"{path}:{lineno}: rows not sorted by (day, timestamp)")
        last = key
        per_day.setdefault(day, []).append((t, p))
    if not per_day:
        raise DataError(f"{path}: no data rows")
    out = []
    for day in sorted(per_day):
        arr = np.array(per_day[day])
        out.append(TickDay(day_index=day, timestamps=arr[:, 0], log_prices=arr[:, 1]))
    return out


# --- realized-volatility series ---------------------------------------------

RV_HEADER = ["day_index", "rv", "k_window", "truncated_count", "error"]


def write_rv_series(path: str, rows, cfg_hash: str, seed: int):
    """rows: iterable of (day_index, rv, k_window, truncated_count, error_str)."""
    _write_csv(path, RV_HEADER,
               ((d, repr(float(v)), k, c, e) for d, v, k, c, e in rows),
               cfg_hash, seed)


def read_rv_series(path: str):
    """Returns (day indices, rv values) for rows without an error flag."""
    days, values = [], []
    for lineno, parts in _read_csv_rows(path, RV_HEADER):
        if parts[4]:
            continue
        try:
            days.append(int(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: unparsable row {parts!r}") from exc
    if not values:
        raise DataError(f"{path}: no usable realized-volatility rows")
    return np.array(days), np.array(values)


# --- daily returns ------------------------------------------------------------

RETURNS_HEADER = ["day", "log_return"]


def write_returns(path: str, days, rets, cfg_hash: str, seed: int):
    _write_csv(path, RETURNS_HEADER,
               ((d, repr(float(r))) for d, r in zip(days, rets)),
               cfg_hash, seed)


def read_returns(path: str):
    days, rets = [], []
    for lineno, parts in _read_csv_rows(path, RETURNS_HEADER):
        try:
            days.append(int(parts[0]))
            rets.append(float(parts[1]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: unparsable row {parts!r}") from exc
    if not rets:
        raise DataError(f"{path}: no return rows")
    return np.array(days), np.array(rets)


# --- model files --------------------------------------------------------------

def serialize_fit(fit: FitResult, meta: dict) -> str:
    """Lossless key = value serialization of a fit (floats via repr)."""
    v = fit.v_hat
    lines = ["[model]"]
    lines.append(f"omega_g = {float(fit.theta_hat.omega_g)!r}")
    lines.append(f"gamma = {float(fit.theta_hat.gamma)!r}")
    lines.append(f"beta_g = {float(fit.theta_hat.beta_g)!r}")
    lines.append(f"objective = {float(fit.objective)!r}")
    lines.append(f"converged = {str(fit.converged).lower()}")
    lines.append(f"iterations = {fit.iterations}")
    lines.append(f"init_policy = {fit.init_policy.value}")
    lines.append("")
    lines.append("[inference]")
    lines.append(f"a_hat = {float(fit.a_hat)!r}")
    for i in range(3):
        for j in range(i, 3):
            lines.append(f"v_{i + 1}{j + 1} = {float(v[i, j])!r}")
    for name, s in zip(("omega_g", "gamma", "beta_g"), fit.std_errors):
        lines.append(f"se_{name} = {float(s)!r}")
    lines.append(f"singular_v = {str(fit.singular_v).lower()}")
    lines.append("")
    lines.append("[meta]")
    lines.append(f"n_days = {fit.n_days}")
    for k, val in meta.items():
        if k not in ("n_days", "version"):
            lines.append(f"{k} = {val}")
    lines.append(f"version = {__version__}")
    return "\n".join(lines) + "\n"


def parse_fit(text: str) -> tuple:
    """Inverse of serialize_fit: returns (FitResult, meta dict)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise DataError(f"model file parse error: {exc}") from exc
    try:
        m = parser["model"]
        inf = parser["inference"]
        meta = dict(parser["meta"])
        theta = GarchParams(float(m["omega_g"]), float(m["gamma"]), float(m["beta_g"]))
        v = np.empty((3, 3))
        for i in range(3):
            for j in range(i, 3):
                v[i, j] = v[j, i] = float(inf[f"v_{i + 1}{j + 1}"])
        std = np.array([float(inf["se_omega_g"]), float(inf["se_gamma"]),
                        float(inf["se_beta_g"])])
        fit = FitResult(
            theta_hat=theta,
            objective=float(m["objective"]),
            converged=m["converged"] == "true",
            iterations=int(m["iterations"]),
            a_hat=float(inf["a_hat"]),
            v_hat=v,
            std_errors=std,
            n_days=int(meta.pop("n_days")),
            singular_v=inf["singular_v"] == "true",
            init_policy=InitPolicy(m["init_policy"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"model file missing or bad field: {exc}") from exc
    return fit, meta


def _data_hash(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_simulate(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Simulate noisy ticks plus the per-day true integrated variance."""
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    sim_cfg = cfg.sim_config()
    theta = cfg.structural()
    try:
        batch = simulate_batch(theta, sim_cfg, n_reps=1)
    except Exception as exc:
        raise NumericalError(str(exc)) from exc
    y = noisy_obs_batch(batch)[0]
    ts = np.arange(sim_cfg.obs_per_day) / sim_cfg.obs_per_day
    h = cfg.hash()
    tick_path = os.path.join(out_dir, "ticks.csv")
    write_tick_file(tick_path, ((d, ts, y[d]) for d in range(sim_cfg.n_days)),
                    h, cfg.seed)
    iv_path = os.path.join(out_dir, "true_iv.csv")
    _write_csv(iv_path, ["day", "true_iv", "n_jumps"],
               ((d, repr(float(batch.true_iv[0, d])), int(batch.jump_counts[0, d]))
                for d in range(sim_cfg.n_days)),
               h, cfg.seed)
    return {"ticks": tick_path, "true_iv": iv_path}


def cmd_rv(tick_path: str, cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Per-day jump-robust pre-averaging realized volatility."""
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    days = read_tick_file(tick_path)
    rows = []
    for day in days:
        try:
            est = jump_robust_prv(day, cfg.c_tau_multiplier)
            rows.append((day.day_index, est.value, est.k_window,
                         est.truncated_count, ""))
        except Exception as exc:
            rows.append((day.day_index, float("nan"), 0, 0, str(exc)))
    rv_path = os.path.join(out_dir, "rv.csv")
    write_rv_series(rv_path, rows, cfg.hash(), cfg.seed)
    return {"rv": rv_path}


def cmd_fit(rv_path: str, cfg: ExperimentConfig, out_dir: str | None = None,
            warm_start: str | None = None) -> dict:
    """Fit the log-IV recursion by QMLE; write the model file and a report."""
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    _, rv = read_rv_series(rv_path)
    rv, n_floored = floor_rv(rv)
    ocfg = cfg.optimizer()
    try:
        if warm_start is not None:
            with open(warm_start, encoding="utf-8") as fh:
                prev, _ = parse_fit(fh.read())
            fit = fit_qmle_warm(rv, ocfg, prev.theta_hat)
        else:
            fit = fit_qmle(rv, ocfg)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if not fit.converged:
        raise NumericalError("no optimizer start converged")
    meta = {"data_hash": _data_hash(rv), "seed": cfg.seed,
            "floored_rv_count": n_floored, "window": cfg.window}
    model_path = os.path.join(out_dir, "model.txt")
    with open(model_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_fit(fit, meta))
    z, p = z_statistics(fit, GarchParams(0.0, 0.0, 0.0))
    report_path = os.path.join(out_dir, "fit_report.txt")
    names = ("omega_g", "gamma", "beta_g")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(f"QMLE fit on {fit.n_days} days "
                 f"(objective {fit.objective:.6f}, "
                 f"{'converged' if fit.converged else 'NOT converged'})\n")
        fh.write(f"{'param':>8} {'estimate':>12} {'std err':>12} "
                 f"{'z (vs 0)':>12} {'p-value':>10}\n")
        est = fit.theta_hat.as_array()
        for i, name in enumerate(names):
            fh.write(f"{name:>8} {est[i]:>12.4f} {fit.std_errors[i]:>12.4f} "
                     f"{z[i]:>12.2f} {p[i]:>10.3g}\n")
        if n_floored:
            fh.write(f"note: {n_floored} non-positive RV values floored\n")
    return {"model": model_path, "report": report_path}


def fit_qmle_warm(rv: np.ndarray, cfg: OptimizerConfig,
                  start: GarchParams) -> FitResult:
    """Single-start refit from a previous estimate (idempotent at an optimum)."""
    from .qmle import _neg_objective, _pack, _unpack, estimate_A, estimate_V
    from scipy.optimize import minimize
    u0 = _pack(start.omega_g, start.gamma, start.beta_g, cfg)
    res = minimize(_neg_objective, u0, args=(rv, cfg), method="Nelder-Mead",
                   options={"maxiter": cfg.max_iterations,
                            "fatol": cfg.tolerance * 1e-2, "xatol": 1e-10})
    omega, gamma, beta = _unpack(res.x, cfg)
    theta = GarchParams(omega, gamma, beta)
    a_hat = estimate_A(theta, rv, cfg.init_policy)
    v_hat = estimate_V(theta, rv, cfg.init_policy)
    n = rv.size
    singular = bool(np.linalg.cond(v_hat) > 1e12)
    std = (np.full(3, np.nan) if singular
           else np.sqrt(a_hat * np.diag(np.linalg.inv(v_hat)) / n))
    return FitResult(theta_hat=theta, objective=float(-res.fun),
                     converged=bool(res.success), iterations=res.nit,
                     a_hat=a_hat, v_hat=v_hat, std_errors=std, n_days=n,
                     singular_v=singular, init_policy=cfg.init_policy,
                     starts_converged=int(res.success))


# --- Monte-Carlo study --------------------------------------------------------

# true recursion parameters of the reference simulation design
# (omega = -0.1, gamma = 0.3, beta = 0.5, nu = 2)
PUBLISHED_GARCH_TRUTH = GarchParams(0.3207, 0.3, 0.4405)


def _true_h_next(true_iv: np.ndarray, theta0: GarchParams) -> float:
    """H_{n+1}(theta0) from the true IV path (H_1 = log IV_1)."""
    liv = np.log(true_iv)
    h = liv[0]
    for i in range(1, liv.size):
        h = theta0.omega_g + theta0.gamma * h + theta0.beta_g * liv[i - 1]
    h_next = theta0.omega_g + theta0.gamma * h + theta0.beta_g * liv[-1]
    return h_next


def _rep_chunks(n_reps: int, n_days: int, m: int, budget_bytes: float = 2e8):
    per_rep = n_days * m * 8.0
    chunk = max(1, int(budget_bytes / per_rep))
    starts = list(range(0, n_reps, chunk))
    return [(s, min(chunk, n_reps - s)) for s in starts]


def run_mc_cell(cfg: ExperimentConfig, n: int, m: int, theta0: GarchParams,
                forecast_models: bool = True) -> dict:
    """One (n, m) Monte-Carlo cell: estimates, z-statistics, forecasts."""
    theta = cfg.structural()
    ocfg = cfg.optimizer()
    reps = cfg.replications
    est = np.full((reps, 3), np.nan)
    zs = np.full((reps, 3), np.nan)
    fc_err = {"ERGI": np.full(reps, np.nan),
              "RealGARCH": np.full(reps, np.nan),
              "PRV": np.full(reps, np.nan)}
    n_failed = 0
    ts = np.arange(m) / m
    for offset, count in _rep_chunks(reps, n + 1, m):
        sim_cfg = cfg.sim_config(n_days=n + 1, obs=m)
        batch = simulate_batch(theta, sim_cfg, n_reps=count, strict=False,
                               rep_offset=offset)
        y = noisy_obs_batch(batch)
        for r in range(count):
            gi = offset + r
            if batch.failed[r]:
                n_failed += 1
                continue
            try:
                rv_all = np.array([
                    jump_robust_prv(TickDay(d, ts, y[r, d]), cfg.c_tau_multiplier).value
                    for d in range(n + 1)])
                rv_all, _ = floor_rv(rv_all)
                rv_in = rv_all[:n]
                fit = fit_qmle(rv_in, ocfg)
                est[gi] = fit.theta_hat.as_array()
                z, _ = z_statistics(fit, theta0)
                zs[gi] = z
            except Exception:
                n_failed += 1
                continue
            if forecast_models:
                target = math.exp(_true_h_next(batch.true_iv[r, :n], theta0))
                try:
                    fc_err["ERGI"][gi] = forecast_ergi(fit, rv_in) - target
                    fc_err["RealGARCH"][gi] = (
                        fit_realized_garch_linear(rv_in).forecast - target)
                    fc_err["PRV"][gi] = rv_in[-1] - target
                except Exception:
                    fc_err["ERGI"][gi] = np.nan
                    fc_err["RealGARCH"][gi] = np.nan
                    fc_err["PRV"][gi] = np.nan
    ok = ~np.isnan(est[:, 0])
    return {
        "n": n, "m": m,
        "estimates": est, "z": zs, "ok": ok, "n_failed": n_failed,
        "mse": np.nanmean((est - theta0.as_array()) ** 2, axis=0),
        "forecast_errors": fc_err,
    }


def cmd_mc_study(cfg: ExperimentConfig, out_dir: str | None = None,
                 theta0: GarchParams = PUBLISHED_GARCH_TRUTH) -> dict:
    """Monte-Carlo study: parameter MSE table, z-statistic QQ data, and the
    one-day-ahead forecast comparison."""
    if cfg.replications < 1:
        raise ConfigError("replications must be >= 1")
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    h = cfg.hash()
    mse_rows = []
    qq_rows = []
    fc_rows = []
    for n in cfg.n_list:
        for m in cfg.m_list:
            cell = run_mc_cell(cfg, n, m, theta0)
            n_eff = int(cell["ok"].sum())
            mse_rows.append((n, m, *(repr(float(v)) for v in cell["mse"]), n_eff))
            z = cell["z"][cell["ok"]]
            for pi, pname in enumerate(("omega_g", "gamma", "beta_g")):
                zi = np.sort(z[:, pi])
                zi = zi[np.isfinite(zi)]
                if zi.size:
                    qs = norm.ppf((np.arange(zi.size) + 0.5) / zi.size)
                    for emp, q in zip(zi, qs):
                        qq_rows.append((n, m, pname, repr(float(emp)), repr(float(q))))
            errs = cell["forecast_errors"]
            valid = ~np.isnan(errs["ERGI"])
            if valid.any():
                se = {tag: errs[tag][valid] ** 2 for tag in errs}
                wins = np.ones(int(valid.sum()), dtype=bool)
                for tag in ("RealGARCH", "PRV"):
                    wins &= se["ERGI"] < se[tag]
                for tag in errs:
                    fc_rows.append((n, m, tag, repr(float(np.mean(se[tag]))),
                                    repr(float(wins.mean())) if tag == "ERGI" else ""))
    mse_path = os.path.join(out_dir, "mc_mse.csv")
    _write_csv(mse_path, ["n", "m", "mse_omega_g", "mse_gamma", "mse_beta_g",
                          "n_effective"], mse_rows, h, cfg.seed)
    qq_path = os.path.join(out_dir, "mc_qq.csv")
    _write_csv(qq_path, ["n", "m", "param", "empirical_quantile",
                         "normal_quantile"], qq_rows, h, cfg.seed)
    fc_path = os.path.join(out_dir, "mc_forecast_mse.csv")
    _write_csv(fc_path, ["n", "m", "model", "forecast_mse", "ergi_win_rate"],
               fc_rows, h, cfg.seed)
    return {"mse": mse_path, "qq": qq_path, "forecast_mse": fc_path}


# --- backtest -----------------------------------------------------------------

def cmd_backtest(rv_path: str, returns_path: str | None, cfg: ExperimentConfig,
                 out_dir: str | None = None) -> dict:
    """Rolling one-step backtest with forecast, metric, DM, and rank tables."""
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    _, rv = read_rv_series(rv_path)
    rv, _ = floor_rv(rv)
    returns = None
    if returns_path is not None:
        _, returns = read_returns(returns_path)
        if returns.size != rv.size:
            raise DataError("returns series length differs from rv series")
    models = list(cfg.models)
    if "UGARCH" in models and returns is None:
        raise DataError("UGARCH requested but no returns series supplied")
    if rv.size <= cfg.window + 1 - 1:
        raise DataError(f"need more than window+1={cfg.window + 1} days, "
                        f"got {rv.size}")
    series, failures = rolling_backtest(rv, returns, cfg.window, models,
                                        cfg.refit_every, cfg.optimizer())
    h = cfg.hash()
    fc_path = os.path.join(out_dir, "forecasts.csv")
    def fc_rows():
        for tag, f in series:
            for d, fc, real in zip(f.horizon_days, f.forecasts, f.realized):
                yield (int(d), tag, repr(float(fc)), repr(float(real)))
    _write_csv(fc_path, ["day", "model", "forecast", "realized"], fc_rows(),
               h, cfg.seed)

    # metrics per model on its own complete days; comparisons on common days
    common = None
    for tag, f in series:
        s = set(f.horizon_days.tolist())
        common = s if common is None else (common & s)
    common = np.array(sorted(common), dtype=int)
    if common.size == 0:
        raise NumericalError("no out-of-sample day succeeded for every model")
    aligned = []
    for tag, f in series:
        idx = np.searchsorted(f.horizon_days, common)
        aligned.append((tag, ForecastSeries(tag, common, f.forecasts[idx],
                                            f.realized[idx])))
    tags, avg_rank, first = rank_table(aligned)
    _, avg_rank_rel, first_rel = rank_table(aligned, relative=True)
    base = aligned[0]
    metric_rows = []
    for i, (tag, f) in enumerate(series):
        osr_vs = repr(float(osr(base[1], aligned[i][1]))) if i > 0 else ""
        metric_rows.append((tag, repr(float(mspe(f))), repr(float(rmspe(f))),
                            osr_vs, repr(float(avg_rank[i])),
                            repr(float(avg_rank_rel[i]))))
    met_path = os.path.join(out_dir, "metrics.csv")
    _write_csv(met_path, ["model", "mspe", "rmspe", "osr_of_first_vs_model",
                          "avg_rank_mspe", "avg_rank_rmspe"], metric_rows,
               h, cfg.seed)
    dm_rows = []
    e_star = base[1].errors()
    for tag, f in aligned[1:]:
        try:
            dm = dm_test(e_star, f.errors())
            dm_rows.append((base[0], tag, repr(dm.statistic), repr(dm.p_less),
                            repr(dm.p_greater), dm.n_used, ""))
        except ValueError as exc:
            dm_rows.append((base[0], tag, "", "", "", 0, str(exc)))
    dm_path = os.path.join(out_dir, "dm.csv")
    _write_csv(dm_path, ["candidate", "competitor", "statistic", "p_less",
                         "p_greater", "n", "error"], dm_rows, h, cfg.seed)
    rank_path = os.path.join(out_dir, "ranks.csv")
    _write_csv(rank_path,
               ["model", "avg_rank_mspe", "first_mspe", "avg_rank_rmspe",
                "first_rmspe"],
               ((tags[i], repr(float(avg_rank[i])), int(first[i]),
                 repr(float(avg_rank_rel[i])), int(first_rel[i]))
                for i in range(len(tags))),
               h, cfg.seed)
    fail_total = sum(len(v) for v in failures.values())
    return {"forecasts": fc_path, "metrics": met_path, "dm": dm_path,
            "ranks": rank_path, "failures": fail_total}


def cmd_full_study(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """simulate -> rv -> fit -> backtest end to end on one configuration."""
    out_dir = _ensure_out(out_dir or cfg.out_dir)
    paths = cmd_simulate(cfg, out_dir)
    paths.update(cmd_rv(paths["ticks"], cfg, out_dir))
    paths.update(cmd_fit(paths["rv"], cfg, out_dir))
    ticks = read_tick_file(paths["ticks"])
    rets = np.array([d.log_prices[-1] - d.log_prices[0] for d in ticks])
    ret_path = os.path.join(out_dir, "returns.csv")
    write_returns(ret_path, [d.day_index for d in ticks], rets,
                  cfg.hash(), cfg.seed)
    paths["returns"] = ret_path
    # the backtest needs more days than the window; shrink if necessary
    # (keep >= 60 in-sample days so every benchmark can fit)
    bt_cfg = cfg
    _, rv = read_rv_series(paths["rv"])
    if rv.size <= cfg.window + 1:
        bt_cfg = replace(cfg, window=max(60, rv.size // 2))
    paths.update(cmd_backtest(paths["rv"], ret_path, bt_cfg, out_dir))
    return paths
