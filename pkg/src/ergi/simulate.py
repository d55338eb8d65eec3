"""Sample-path generation for the exponential realized GARCH jump-diffusion.

The process is simulated by explicit Euler stepping of the coupled system
(log-price X, spot variance, within-day average variance, the interpolating
drift process b, and the within-day Brownian fluctuation Z) on a fine
intra-day grid.  Day boundaries carry the state continuously; the within-day
average integrated variance is accumulated with a left Riemann sum (the same
quantity that drives the b recursion), while the reported daily integrated
variance applies the trapezoid end-correction.

Jumps are compound Poisson with fixed absolute size and random signs, and
enter the log-price only.  Microstructure noise is added at observation
times, per day, with standard deviation proportional to the square root of
that day's true integrated variance.

All randomness is keyed by (seed, purpose, replication, day) substreams, so
a replication simulated inside a batch is bit-identical to the same
replication simulated alone, and parallel execution order cannot change any
output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from . import _rng
from ._rng import next_u64, next_unit, substate, znorm
from .core import StructuralParams, beta_star, omega_star, rho_coefficients

__all__ = [
    "SimConfig",
    "PathRecord",
    "NoisyObservations",
    "LogMgfEstimate",
    "SimulationError",
    "simulate_ergi",
    "simulate_batch",
    "add_microstructure_noise",
    "estimate_log_mgf_D",
]

# substream purpose tags (stable across versions; part of the output contract)
_STREAM_VOL = 1
_STREAM_PRICE = 2
_STREAM_JUMP = 3
_STREAM_NOISE = 4
_STREAM_MGF = 5

_MAX_JUMPS_PER_DAY = 256


class SimulationError(RuntimeError):
    """Raised when a path blows up or a configuration is unusable."""


@dataclass(frozen=True)
class SimConfig:
    n_days: int
    grid_steps_per_day: int = 11700
    obs_per_day: int = 390
    noise_ratio: float = 0.01
    jump_intensity: float = 10.0
    jump_abs_size: float = 0.05
    seed: int = 0
    burn_in_days: int = 10

    def __post_init__(self):
        if not (self.grid_steps_per_day >= self.obs_per_day >= 2):
            raise ValueError("require grid_steps_per_day >= obs_per_day >= 2")
        if self.grid_steps_per_day % self.obs_per_day != 0:
            raise ValueError("obs_per_day must divide grid_steps_per_day")
        if self.noise_ratio < 0 or self.jump_intensity < 0:
            raise ValueError("noise_ratio and jump_intensity must be >= 0")
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")


@dataclass
class PathRecord:
    """Full-grid record of one simulated path (grid arrays include both endpoints)."""

    log_prices: np.ndarray      # (n_days, G+1)
    spot_var: np.ndarray        # (n_days, G+1)
    b_path: np.ndarray          # (n_days, G+1)
    true_iv: np.ndarray         # (n_days,)
    jump_times_sizes: list      # per day: (times, sizes) arrays, times in (0,1]
    config: SimConfig
    theta: StructuralParams
    negative_spot_steps: int = 0
    clipped_day_ends: int = 0


@dataclass
class NoisyObservations:
    """Per-day noisy log-price observations on the subsampled grid."""

    timestamps: np.ndarray      # (obs_per_day,), fraction of day in [0, 1)
    log_prices: np.ndarray      # (n_days, obs_per_day)
    config: SimConfig


@dataclass
class LogMgfEstimate:
    value: float
    std_error: float
    n_replications: int
    n_steps: int
    mean_d: float = 0.0
    std_d: float = 0.0

    def __float__(self):
        return float(self.value)


@njit(cache=True)
def _day_kernel(sv, sp, sig2_0, b_0, x_0, G, omega, gamma, beta, beta_s, nu,
                x_grid, sig2_grid, b_grid, store_vol):
    """One day of Euler stepping. Returns day-end state and diagnostics.

    sv, sp: xoshiro states for the volatility and price streams.
    x_grid is always filled (length G+1, diffusion price only); the variance
    and b trajectories are stored only when ``store_vol``.
    """
    du = 1.0 / G
    sdu = math.sqrt(du)
    logsig0 = math.log(sig2_0)
    b0 = b_0
    sig2 = sig2_0
    x = x_0
    I = 0.0
    Z = 0.0
    n_neg = 0
    x_grid[0] = x
    if store_vol:
        sig2_grid[0] = sig2
        b_grid[0] = b_0
    blow_limit = 1e6 * sig2_0
    b = b_0
    for k in range(G):
        sig2_eff = sig2 if sig2 > 0.0 else 0.0
        x += math.sqrt(sig2_eff * du) * znorm(sp)
        x_grid[k + 1] = x
        I += sig2 * du
        Z += sdu * znorm(sv)
        u1 = (k + 1) * du
        sbar2 = I / u1
        if sbar2 <= 0.0:
            return x, sig2, b, I, -1.0, n_neg, 2  # degenerate average variance
        b = (b0 + u1 * (omega + (gamma - 1.0) * b0) + beta * math.log(sbar2)
             - (1.0 - u1) * (beta + beta_s * u1) * logsig0
             + nu * (1.0 - u1) * Z * Z)
        sig2 = sbar2 * (1.0 + u1 * b)
        if sig2 <= 0.0:
            n_neg += 1
        if sig2 > blow_limit:
            return x, sig2, b, I, -1.0, n_neg, 1  # blow-up
        if store_vol:
            sig2_grid[k + 1] = sig2
            b_grid[k + 1] = b
    true_iv = I + 0.5 * (sig2 - sig2_0) * du  # trapezoid end-correction
    return x, sig2, b, I, true_iv, n_neg, 0


@njit(cache=True)
def _poisson_knuth(s, lam):
    if lam <= 0.0:
        return 0
    limit = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= next_unit(s)
        if p <= limit:
            return k
        k += 1
        if k >= _MAX_JUMPS_PER_DAY:
            return _MAX_JUMPS_PER_DAY


@njit(cache=True)
def _draw_day_jumps(sj, lam, jump_size, times, sizes):
    """Fills times/sizes buffers; returns the jump count."""
    n = _poisson_knuth(sj, lam)
    for i in range(n):
        times[i] = next_unit(sj)   # in (0, 1]
        sizes[i] = jump_size if next_u64_bit(sj) else -jump_size
    # insertion sort by time (n is small)
    for i in range(1, n):
        t = times[i]
        z = sizes[i]
        j = i - 1
        while j >= 0 and times[j] > t:
            times[j + 1] = times[j]
            sizes[j + 1] = sizes[j]
            j -= 1
        times[j + 1] = t
        sizes[j + 1] = z
    return n


@njit(inline="always", cache=True)
def next_u64_bit(s):
    return next_u64(s) & np.uint64(1)


@njit(parallel=True, cache=True)
def _simulate_reps(key_vol, key_price, key_jump, n_reps, rep_offset,
                   n_days, burn_in, G,
                   omega, gamma, beta, beta_s, nu,
                   sig2_init, b_init, lam, jump_size, obs_stride,
                   x_obs, true_iv, jump_counts, jump_times, jump_sizes,
                   x_grid_all, sig2_grid_all, b_grid_all, store_grid,
                   status, neg_steps, clipped_ends):
    """Simulate n_reps independent paths; outputs indexed [rep, day, ...].

    Day indices in outputs exclude burn-in.  Replication r uses substreams
    keyed (purpose_key, rep_offset + r, absolute_day), so results do not
    depend on batch size, chunking, or scheduling.
    """
    n_obs = G // obs_stride
    total_days = burn_in + n_days
    for r in prange(n_reps):
        sig2 = sig2_init
        b = b_init
        x = 0.0
        x_grid = np.empty(G + 1)
        sig2_grid = np.empty(G + 1)
        b_grid = np.empty(G + 1)
        jt = np.empty(_MAX_JUMPS_PER_DAY)
        jz = np.empty(_MAX_JUMPS_PER_DAY)
        ok = True
        for d in range(total_days):
            if not ok:
                break
            sv = substate(key_vol, rep_offset + r, d)
            sp = substate(key_price, rep_offset + r, d)
            sj = substate(key_jump, rep_offset + r, d)
            keep = d >= burn_in
            od = d - burn_in
            store = store_grid and keep
            xg = x_grid_all[r, od] if store else x_grid
            sg = sig2_grid_all[r, od] if store else sig2_grid
            bg = b_grid_all[r, od] if store else b_grid
            x_end, sig2_end, b_end, I_left, iv, n_neg, st = _day_kernel(
                sv, sp, sig2, b, x, G, omega, gamma, beta, beta_s, nu, xg, sg, bg, store)
            if st != 0:
                status[r] = st
                ok = False
                break
            neg_steps[r] += n_neg
            nj = _draw_day_jumps(sj, lam, jump_size, jt, jz)
            if keep:
                true_iv[r, od] = iv
                jump_counts[r, od] = nj
                for i in range(nj):
                    jump_times[r, od, i] = jt[i]
                    jump_sizes[r, od, i] = jz[i]
                # observations: grid indices 0, stride, ..., (n_obs-1)*stride
                ji = 0
                cum = 0.0
                for j in range(n_obs):
                    t_obs = (j * obs_stride) / G
                    while ji < nj and jt[ji] <= t_obs:
                        cum += jz[ji]
                        ji += 1
                    x_obs[r, od, j] = xg[j * obs_stride] + cum
            # carry state; jumps shift the price level for subsequent days
            jump_total = 0.0
            for i in range(nj):
                jump_total += jz[i]
            x = x_end + jump_total
            b = b_end
            if sig2_end <= 0.0:
                sig2 = 1e-12 * max(I_left, 1e-300)
                clipped_ends[r] += 1
            else:
                sig2 = sig2_end


def _initial_state(theta: StructuralParams):
    """Day-zero state, discarded by the burn-in: spot variance at the
    stationary mean of the log-IV recursion, b at its jump-free fixed point."""
    rc = rho_coefficients(theta.beta, theta.gamma)
    beta_g = rc.rho * theta.beta
    denom = 1.0 - theta.gamma - beta_g
    if abs(denom) < 1e-10:
        raise SimulationError("structural parameters imply a non-stationary log-IV recursion")
    h_mean = omega_star(theta) / denom
    sig2_0 = math.exp(h_mean)
    b_0 = theta.omega / (1.0 - theta.gamma)
    return sig2_0, b_0


def _run_batch(theta: StructuralParams, cfg: SimConfig, n_reps: int, store_grid: bool,
               rep_offset: int = 0):
    bs = beta_star(theta.beta)
    sig2_0, b_0 = _initial_state(theta)
    G = cfg.grid_steps_per_day
    stride = G // cfg.obs_per_day
    n_obs = cfg.obs_per_day
    key_vol = np.uint64(_rng.stream_key(cfg.seed, _STREAM_VOL))
    key_price = np.uint64(_rng.stream_key(cfg.seed, _STREAM_PRICE))
    key_jump = np.uint64(_rng.stream_key(cfg.seed, _STREAM_JUMP))
    x_obs = np.empty((n_reps, cfg.n_days, n_obs))
    true_iv = np.empty((n_reps, cfg.n_days))
    jump_counts = np.zeros((n_reps, cfg.n_days), dtype=np.int64)
    jump_times = np.zeros((n_reps, cfg.n_days, _MAX_JUMPS_PER_DAY))
    jump_sizes = np.zeros((n_reps, cfg.n_days, _MAX_JUMPS_PER_DAY))
    if store_grid:
        x_grid = np.empty((n_reps, cfg.n_days, G + 1))
        sig2_grid = np.empty((n_reps, cfg.n_days, G + 1))
        b_grid = np.empty((n_reps, cfg.n_days, G + 1))
    else:
        x_grid = np.empty((1, 1, G + 1))
        sig2_grid = np.empty((1, 1, G + 1))
        b_grid = np.empty((1, 1, G + 1))
    status = np.zeros(n_reps, dtype=np.int64)
    neg_steps = np.zeros(n_reps, dtype=np.int64)
    clipped = np.zeros(n_reps, dtype=np.int64)
    _simulate_reps(key_vol, key_price, key_jump, n_reps, rep_offset,
                   cfg.n_days, cfg.burn_in_days, G,
                   theta.omega, theta.gamma, theta.beta, bs, theta.nu,
                   sig2_0, b_0, cfg.jump_intensity, cfg.jump_abs_size, stride,
                   x_obs, true_iv, jump_counts, jump_times, jump_sizes,
                   x_grid, sig2_grid, b_grid, store_grid,
                   status, neg_steps, clipped)
    return {
        "x_obs": x_obs, "true_iv": true_iv,
        "jump_counts": jump_counts, "jump_times": jump_times, "jump_sizes": jump_sizes,
        "x_grid": x_grid, "sig2_grid": sig2_grid, "b_grid": b_grid,
        "status": status, "neg_steps": neg_steps, "clipped": clipped,
    }


def _raise_on_status(status: np.ndarray):
    if (status == 1).any():
        raise SimulationError(
            "spot variance exceeded 1e6 x its day-start value "
            "(non-stationary structural configuration)")
    if (status != 0).any():
        raise SimulationError("average intra-day variance became non-positive")


def simulate_ergi(theta: StructuralParams, cfg: SimConfig) -> PathRecord:
    """Simulate one path, recording the full fine-grid trajectories."""
    out = _run_batch(theta, cfg, n_reps=1, store_grid=True)
    _raise_on_status(out["status"])
    jts = []
    for d in range(cfg.n_days):
        nj = out["jump_counts"][0, d]
        jts.append((out["jump_times"][0, d, :nj].copy(), out["jump_sizes"][0, d, :nj].copy()))
    # the kernel carries jump levels across days; fold each day's own jumps
    # into that day's grid row (jump at time u moves X from u onward)
    G = cfg.grid_steps_per_day
    tgrid = np.arange(G + 1) / G
    x = out["x_grid"][0]
    for d in range(cfg.n_days):
        times, sizes = jts[d]
        if len(times):
            x[d] += np.concatenate([[0.0], np.cumsum(sizes)])[
                np.searchsorted(times, tgrid, side="right")]
    return PathRecord(
        log_prices=x,
        spot_var=out["sig2_grid"][0],
        b_path=out["b_grid"][0],
        true_iv=out["true_iv"][0],
        jump_times_sizes=jts,
        config=cfg,
        theta=theta,
        negative_spot_steps=int(out["neg_steps"][0]),
        clipped_day_ends=int(out["clipped"][0]),
    )


@dataclass
class BatchPaths:
    """Observation-grid view of many replications (used by the study drivers)."""

    x_obs: np.ndarray           # (n_reps, n_days, obs_per_day), jumps included
    true_iv: np.ndarray         # (n_reps, n_days)
    jump_counts: np.ndarray     # (n_reps, n_days)
    config: SimConfig
    theta: StructuralParams
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    rep_offset: int = 0


def simulate_batch(theta: StructuralParams, cfg: SimConfig, n_reps: int,
                   strict: bool = True, rep_offset: int = 0) -> BatchPaths:
    """Simulate ``n_reps`` independent replications on the observation grid.

    With ``strict`` a blown-up replication raises; otherwise it is flagged in
    ``failed`` and its arrays are left as NaN.  ``rep_offset`` shifts the
    substream indices so chunked runs reproduce one large batch exactly.
    """
    out = _run_batch(theta, cfg, n_reps=n_reps, store_grid=False,
                     rep_offset=rep_offset)
    failed = out["status"] != 0
    if strict:
        _raise_on_status(out["status"])
    elif failed.any():
        out["x_obs"][failed] = np.nan
        out["true_iv"][failed] = np.nan
    return BatchPaths(
        x_obs=out["x_obs"],
        true_iv=out["true_iv"],
        jump_counts=out["jump_counts"],
        config=cfg,
        theta=theta,
        failed=failed,
        rep_offset=rep_offset,
    )


def observation_times(cfg: SimConfig) -> np.ndarray:
    """Within-day observation timestamps (fraction of day, in [0, 1))."""
    return np.arange(cfg.obs_per_day) / cfg.obs_per_day


def add_microstructure_noise(path: PathRecord, cfg: SimConfig | None = None) -> NoisyObservations:
    """Subsample the fine grid and add per-day Gaussian observation noise.

    Noise standard deviation on day d is ``noise_ratio * sqrt(true_iv[d])``.
    """
    cfg = cfg or path.config
    G = cfg.grid_steps_per_day
    stride = G // cfg.obs_per_day
    idx = np.arange(cfg.obs_per_day) * stride
    n_days = path.log_prices.shape[0]
    y = np.empty((n_days, cfg.obs_per_day))
    for d in range(n_days):
        rng = _rng.numpy_generator(cfg.seed, _STREAM_NOISE, 0, d)
        sd = cfg.noise_ratio * math.sqrt(path.true_iv[d])
        y[d] = path.log_prices[d, idx] + sd * rng.standard_normal(cfg.obs_per_day)
    return NoisyObservations(timestamps=idx / G, log_prices=y, config=cfg)


def noisy_obs_batch(batch: BatchPaths) -> np.ndarray:
    """Noisy observations for every replication of a batch, (reps, days, obs)."""
    cfg = batch.config
    n_reps, n_days, n_obs = batch.x_obs.shape
    y = np.empty_like(batch.x_obs)
    for r in range(n_reps):
        for d in range(n_days):
            rng = _rng.numpy_generator(cfg.seed, _STREAM_NOISE,
                                       batch.rep_offset + r, d)
            sd = cfg.noise_ratio * math.sqrt(batch.true_iv[r, d])
            y[r, d] = batch.x_obs[r, d] + sd * rng.standard_normal(n_obs)
    return y


# ---------------------------------------------------------------------------
# Monte-Carlo estimate of log E[exp(D_n)]
# ---------------------------------------------------------------------------

def _mgf_coeffs(beta: float, n_steps: int) -> np.ndarray:
    """Integrand coefficients c_j = 2 f(1 - u_j) at left endpoints u_j = j/N.

    f(s) = s e^{beta s}/beta - (e^{beta s} - 1)/beta^2, with the small-beta
    series f(s) = s^2/2 + beta s^3/3 + beta^2 s^4/8 used below |beta| < 1e-4.
    """
    u = np.arange(n_steps) / n_steps
    s = 1.0 - u
    if abs(beta) < 1e-4:
        f = s * s / 2.0 + beta * s**3 / 3.0 + beta * beta * s**4 / 8.0
    else:
        f = s * np.exp(beta * s) / beta - np.expm1(beta * s) / beta**2
    return 2.0 * f


@njit(parallel=True, fastmath=True, cache=True)
def _mgf_kernel(root_key, n_chunks, reps_per_chunk, rem, n_steps, coef, nu, partials):
    sdt = 1.0 / math.sqrt(n_steps)
    for c in prange(n_chunks):
        s = substate(root_key, c, 0)
        n_here = reps_per_chunk + (1 if c < rem else 0)
        s_exp = 0.0
        s_exp2 = 0.0
        s_d = 0.0
        s_d2 = 0.0
        for _ in range(n_here):
            w = 0.0
            d = 0.0
            for j in range(n_steps):
                dw = znorm(s) * sdt
                d += coef[j] * w * dw
                w += dw
            d *= nu
            e = math.exp(d)
            s_exp += e
            s_exp2 += e * e
            s_d += d
            s_d2 += d * d
        partials[c, 0] = s_exp
        partials[c, 1] = s_exp2
        partials[c, 2] = s_d
        partials[c, 3] = s_d2
        partials[c, 4] = n_here


def estimate_log_mgf_D(theta: StructuralParams, replications: int, seed: int,
                       n_steps: int = 10_000) -> LogMgfEstimate:
    """Monte-Carlo log E[exp(D_n)] via Euler sums of the stochastic integral.

    D_n is simulated replication-by-replication as the left-point Euler sum of
    the (deterministic-coefficient x Z_t) integrand against the Brownian
    increments on an ``n_steps``-point unit-interval grid.  Returns the log of
    the sample mean of exp(D) with a delta-method standard error.
    """
    if replications < 10_000:
        raise ValueError("replications must be >= 1e4")
    if n_steps < 10_000:
        raise ValueError("n_steps must be >= 1e4")
    if theta.nu == 0.0:
        return LogMgfEstimate(0.0, 0.0, replications, n_steps)
    coef = _mgf_coeffs(theta.beta, n_steps)
    n_chunks = 128
    reps_per_chunk, rem = divmod(replications, n_chunks)
    partials = np.zeros((n_chunks, 5))
    root_key = np.uint64(_rng.stream_key(seed, _STREAM_MGF))
    _mgf_kernel(root_key, n_chunks, reps_per_chunk, rem, n_steps, coef,
                theta.nu, partials)
    n = partials[:, 4].sum()
    mean_exp = partials[:, 0].sum() / n
    var_exp = partials[:, 1].sum() / n - mean_exp**2
    se = math.sqrt(max(var_exp, 0.0) / n) / mean_exp
    mean_d = partials[:, 2].sum() / n
    var_d = partials[:, 3].sum() / n - mean_d**2
    if se > 1e-2:
        warnings.warn(f"log-MGF Monte-Carlo standard error {se:.3g} exceeds 1e-2; "
                      "increase replications", stacklevel=2)
    return LogMgfEstimate(
        value=math.log(mean_exp),
        std_error=se,
        n_replications=int(n),
        n_steps=n_steps,
        mean_d=mean_d,
        std_d=math.sqrt(max(var_d, 0.0)),
    )
