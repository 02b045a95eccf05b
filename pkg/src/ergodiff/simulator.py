"""Regeneration-aware Monte Carlo engine.

Paths follow Euler-Maruyama with step h.  Level hits are detected by a sign
change of (X - level) across a step, with the crossing instant placed by
linear interpolation inside the step; optionally a Brownian-bridge test also
fires on same-side steps (probability exp(-2 d0 d1 / (sigma^2 h))), which
removes the O(sqrt(h)) barrier-shift bias of pure sign-change detection at
the cost of one extra uniform stream.

Randomness is counter-based: replica r in block b consumes row (r mod B) of
per-(seed, block, kind, chunk) Philox streams, so every replica's path is a
pure function of (seed, replica index) -- independent of how many replicas
run, of chunk scheduling, and of the thread count.  Reductions iterate
blocks in index order, so results are bitwise reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .diffusion import DiffusionModel
from .errors import (ConfigError, DomainError, ExcessCensoringError,
                     InsufficientCyclesError, NumericalBlowupError)
from .quadrature import vectorize_integrand

__all__ = [
    "InitialLaw", "SimConfig", "RegenerationSample", "BatchResult",
    "Estimate", "MomentEstimates", "HittingEstimate", "EmpiricalDeviation",
    "simulate_path", "simulate_paths", "estimate_hitting_moment",
    "estimate_hitting_moments", "estimate_constants",
    "estimate_deviation_prob", "nu_moment_estimate", "write_samples_csv",
]

_BLOCK = 4096       # replicas per stream block (fixed: part of the RNG layout)
_CHUNK = 512        # steps per noise chunk (fixed: part of the RNG layout)
_KIND_NORMAL = 0
_KIND_UNIFORM = 1
_KIND_INITIAL = 2
_KIND_AUX = 3

CROSSING_RULES = ("interpolate", "bridge")


def _stream(seed: int, block: int, kind: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block, kind, chunk))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class InitialLaw:
    """Initial distribution: point mass, uniform, gaussian, or a rejection
    sampler for an unnormalized density on a box."""

    kind: str
    params: tuple = ()
    density: object = None

    @classmethod
    def point(cls, x0: float) -> "InitialLaw":
        return cls("point", (float(x0),))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "InitialLaw":
        if not lo < hi:
            raise ConfigError("uniform law needs lo < hi")
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "InitialLaw":
        if sd <= 0:
            raise ConfigError("gaussian law needs sd > 0")
        return cls("gaussian", (float(mean), float(sd)))

    @classmethod
    def rejection(cls, density, lo: float, hi: float, cap: float) -> "InitialLaw":
        if not lo < hi or cap <= 0:
            raise ConfigError("rejection law needs lo < hi and cap > 0")
        return cls("density", (float(lo), float(hi), float(cap)),
                   vectorize_integrand(density))

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(n, self.params[0])
        if self.kind == "uniform":
            lo, hi = self.params
            return gen.uniform(lo, hi, size=n)
        if self.kind == "gaussian":
            mean, sd = self.params
            return mean + sd * gen.standard_normal(n)
        lo, hi, cap = self.params
        out = np.empty(n)
        filled = 0
        while filled < n:
            xs = gen.uniform(lo, hi, size=2 * (n - filled) + 16)
            us = gen.uniform(0.0, cap, size=xs.size)
            dens = self.density(xs)
            if np.any(dens > cap):
                raise ConfigError("rejection density exceeds its cap")
            acc = xs[us < dens]
            take = min(acc.size, n - filled)
            out[filled:filled + take] = acc[:take]
            filled += take
        return out


@dataclass(frozen=True)
class SimConfig:
    """Discretization, horizon, replication and regeneration levels."""

    step: float
    horizon: float
    replicas: int
    seed: int
    a: float
    b: float
    initial: InitialLaw | float
    crossing: str = "interpolate"
    blowup_guard: float = 1e9
    threads: int = 1

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigError("step must be positive")
        if self.horizon < self.step:
            raise ConfigError("horizon must cover at least one step")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not self.a < self.b:
            raise ConfigError("regeneration pair needs a < b")
        if self.crossing not in CROSSING_RULES:
            raise ConfigError(f"crossing must be one of {CROSSING_RULES}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if isinstance(self.initial, (int, float)):
            object.__setattr__(self, "initial", InitialLaw.point(self.initial))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass
class RegenerationSample:
    """Per-path regeneration record on [0, horizon]."""

    r_times: np.ndarray
    s_times: np.ndarray
    cycle_integrals: np.ndarray       # xi_n = int_{R_n}^{R_(n+1)} f, n >= 1
    cycle_abs_integrals: np.ndarray
    first_block_integral: float       # int_0^{R_1} f (nan if R_1 censored)
    first_block_abs: float
    n_t: int
    additive_integral: float          # int_0^horizon f
    horizon: float

    def count_at(self, t: float) -> int:
        """N_t = #{n : R_n <= t}; inverse to the R_n record by construction."""
        return int(np.searchsorted(self.r_times, t, side="right"))

    def inverse_identity_holds(self, t_probe) -> bool:
        """Path-by-path check that {N_t >= n} iff {R_n <= t}."""
        for t in np.atleast_1d(t_probe):
            nt = self.count_at(t)
            for n in range(1, len(self.r_times) + 1):
                if (nt >= n) != (self.r_times[n - 1] <= t):
                    return False
        return True


@dataclass
class BatchResult:
    samples: list
    checkpoints: np.ndarray
    additive_at: np.ndarray    # shape (replicas, n_checkpoints)
    counts_at: np.ndarray


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def within(self, truth: float, n_se: float = 3.0) -> bool:
        return abs(self.value - truth) <= n_se * self.se


@dataclass(frozen=True)
class MomentEstimates:
    """Monte Carlo cycle-moment estimates with standard errors."""

    p: float
    l_hat: Estimate
    r1_centered_halfp: Estimate
    r1_halfp: Estimate
    eta_p: Estimate
    r1_p_at_a: Estimate
    cycle_gap_p: Estimate
    c_f_hat: Estimate
    mu_f_hat: Estimate
    mean_cycle_time: Estimate   # pooled E_a R_1
    n_cycles: int


@dataclass(frozen=True)
class HittingEstimate:
    estimate: float
    stderr: float
    censored_fraction: float
    order: int
    n_used: int
    lower_bias_possible: bool


@dataclass(frozen=True)
class EmpiricalDeviation:
    t_grid: np.ndarray
    eps_grid: np.ndarray
    freq: np.ndarray        # shape (len(t_grid), len(eps_grid))
    halfwidth: np.ndarray
    replicas: int


def _block_layout(n: int):
    return [(bid, min(_BLOCK, n - bid * _BLOCK))
            for bid in range((n + _BLOCK - 1) // _BLOCK)]


def _run_blocks(fn, cfg: SimConfig):
    layout = _block_layout(cfg.replicas)
    if cfg.threads == 1 or len(layout) == 1:
        return [fn(bid, cnt) for bid, cnt in layout]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [pool.submit(fn, bid, cnt) for bid, cnt in layout]
        return [f.result() for f in futures]


def _guard(x: np.ndarray, cfg: SimConfig, label: str):
    if np.any(np.abs(x) > cfg.blowup_guard):
        raise NumericalBlowupError(
            f"{label}: |X| exceeded guard {cfg.blowup_guard:g}; "
            "is the model recurrent?")


# -- hitting-time driver -----------------------------------------------------

def _hit_block(model: DiffusionModel, cfg: SimConfig, x0: float,
               barriers: tuple, block: int, n_rep: int) -> np.ndarray:
    h = cfg.step
    sqh = math.sqrt(h)
    nsteps = cfg.n_steps
    bridge = cfg.crossing == "bridge"

    X = np.full(n_rep, float(x0))
    idx = np.arange(n_rep)
    hit = np.full(n_rep, np.nan)
    for lvl in barriers:
        at0 = X == lvl
        if at0.any():
            hit[idx[at0]] = 0.0
            X, idx = X[~at0], idx[~at0]

    t = 0.0
    step = 0
    chunks = (nsteps + _CHUNK - 1) // _CHUNK
    for chunk in range(chunks):
        if idx.size == 0 or step >= nsteps:
            break
        Z = _stream(cfg.seed, block, _KIND_NORMAL, chunk) \
            .standard_normal((n_rep, _CHUNK))
        U = _stream(cfg.seed, block, _KIND_UNIFORM, chunk) \
            .random((n_rep, _CHUNK)) if bridge else None
        for j in range(_CHUNK):
            if step >= nsteps or idx.size == 0:
                break
            x = X
            _guard(x, cfg, model.label)
            s2 = model.sigma_sq(x)
            xn = x + model.drift(x) * h + np.sqrt(s2) * sqh * Z[idx, j]
            theta = np.full(x.shape, np.inf)
            for lvl in barriers:
                d0 = x - lvl
                d1 = xn - lvl
                crossed = d0 * d1 <= 0.0
                if crossed.any():
                    denom = d0 - d1
                    safe = np.where(denom == 0.0, 1.0, denom)
                    frac = np.clip(np.where(denom == 0.0, 0.0, d0 / safe),
                                   0.0, 1.0)
                    theta = np.where(crossed, np.minimum(theta, frac), theta)
                if bridge:
                    arg = -2.0 * d0 * d1 / (s2 * h)
                    p_cross = np.exp(np.minimum(arg, 0.0))
                    fired = (~crossed) & (U[idx, j] < p_cross)
                    if fired.any():
                        theta = np.where(fired, np.minimum(theta, 0.5), theta)
            finished = np.isfinite(theta)
            if finished.any():
                hit[idx[finished]] = t + theta[finished] * h
                keep = ~finished
                X = xn[keep]
                idx = idx[keep]
            else:
                X = xn
            step += 1
            t = step * h
    return hit


def _simulate_hitting_times(model: DiffusionModel, cfg: SimConfig, x0: float,
                            barriers: tuple) -> np.ndarray:
    parts = _run_blocks(
        lambda bid, cnt: _hit_block(model, cfg, x0, barriers, bid, cnt), cfg)
    return np.concatenate(parts)


# -- regeneration driver -----------------------------------------------------

def _regen_block(model: DiffusionModel, cfg: SimConfig, f, block: int,
                 n_rep: int, cp_steps: np.ndarray,
                 max_cycles: int | None):
    h = cfg.step
    sqh = math.sqrt(h)
    nsteps = cfg.n_steps
    bridge = cfg.crossing == "bridge"
    fv = vectorize_integrand(f)

    X = cfg.initial.sample(_stream(cfg.seed, block, _KIND_INITIAL, 0), n_rep)
    idx = np.arange(n_rep)
    phase = np.zeros(n_rep, dtype=np.int8)   # 0: waiting for b, 1: waiting for a
    cum_f = np.zeros(n_rep)
    cum_fabs = np.zeros(n_rep)
    anchor_f = np.zeros(n_rep)
    anchor_fabs = np.zeros(n_rep)
    r_times = [[] for _ in range(n_rep)]
    s_times = [[] for _ in range(n_rep)]
    cyc_f = [[] for _ in range(n_rep)]
    cyc_fabs = [[] for _ in range(n_rep)]
    first_f = np.full(n_rep, np.nan)
    first_fabs = np.full(n_rep, np.nan)
    additive = np.zeros((n_rep, cp_steps.size))
    counts = np.zeros((n_rep, cp_steps.size), dtype=np.int64)
    cp_lookup = {int(s): i for i, s in enumerate(cp_steps)}

    t = 0.0
    step = 0
    chunks = (nsteps + _CHUNK - 1) // _CHUNK
    for chunk in range(chunks):
        if step >= nsteps or (idx.size == 0 and not cp_lookup):
            break
        if idx.size:
            Z = _stream(cfg.seed, block, _KIND_NORMAL, chunk) \
                .standard_normal((n_rep, _CHUNK))
            U = _stream(cfg.seed, block, _KIND_UNIFORM, chunk) \
                .random((n_rep, _CHUNK)) if bridge else None
        for j in range(_CHUNK):
            if step >= nsteps:
                break
            if idx.size:
                x = X
                _guard(x, cfg, model.label)
                s2 = model.sigma_sq(x)
                xn = x + model.drift(x) * h + np.sqrt(s2) * sqh * Z[idx, j]
                fx = fv(x)
                fax = np.abs(fx)
                level = np.where(phase == 0, cfg.b, cfg.a)
                d0 = x - level
                d1 = xn - level
                crossed = d0 * d1 <= 0.0
                denom = d0 - d1
                safe = np.where(denom == 0.0, 1.0, denom)
                theta = np.where(crossed,
                                 np.clip(np.where(denom == 0.0, 0.0, d0 / safe),
                                         0.0, 1.0),
                                 np.inf)
                if bridge:
                    arg = -2.0 * d0 * d1 / (s2 * h)
                    fired = (~crossed) & (U[idx, j] < np.exp(np.minimum(arg, 0.0)))
                    theta = np.where(fired, 0.5, theta)
                events = np.nonzero(np.isfinite(theta))[0]
                drop = []
                for i in events:
                    g = int(idx[i])
                    te = t + theta[i] * h
                    if phase[i] == 0:
                        s_times[g].append(te)
                        phase[i] = 1
                    else:
                        pf = cum_f[g] + fx[i] * theta[i] * h
                        pfa = cum_fabs[g] + fax[i] * theta[i] * h
                        if r_times[g]:
                            cyc_f[g].append(pf - anchor_f[g])
                            cyc_fabs[g].append(pfa - anchor_fabs[g])
                        else:
                            first_f[g] = pf
                            first_fabs[g] = pfa
                        r_times[g].append(te)
                        anchor_f[g] = pf
                        anchor_fabs[g] = pfa
                        phase[i] = 0
                        if max_cycles is not None \
                                and len(r_times[g]) >= max_cycles:
                            drop.append(i)
                cum_f[idx] += fx * h
                cum_fabs[idx] += fax * h
                X = xn
                if drop:
                    keep = np.ones(idx.size, dtype=bool)
                    keep[drop] = False
                    X, idx, phase = X[keep], idx[keep], phase[keep]
            step += 1
            t = step * h
            ci = cp_lookup.get(step)
            if ci is not None:
                additive[:, ci] = cum_f
                for g in range(n_rep):
                    counts[g, ci] = len(r_times[g])

    samples = []
    for g in range(n_rep):
        samples.append(RegenerationSample(
            r_times=np.asarray(r_times[g]),
            s_times=np.asarray(s_times[g]),
            cycle_integrals=np.asarray(cyc_f[g]),
            cycle_abs_integrals=np.asarray(cyc_fabs[g]),
            first_block_integral=float(first_f[g]),
            first_block_abs=float(first_fabs[g]),
            n_t=len(r_times[g]),
            additive_integral=float(cum_f[g]),
            horizon=cfg.horizon,
        ))
    return samples, additive, counts


def simulate_paths(model: DiffusionModel, cfg: SimConfig, f,
                   checkpoints=(), max_cycles: int | None = None
                   ) -> BatchResult:
    """Simulate cfg.replicas regeneration paths; see RegenerationSample.

    ``checkpoints`` are times (snapped to the step grid) at which the running
    additive integral and cycle count are recorded for every replica.
    ``max_cycles`` freezes a replica once it has recorded that many R-events
    (an efficiency device for first-block and cycle-law estimation).
    """
    cps = np.asarray(sorted(checkpoints), dtype=float)
    cp_steps = np.unique(np.round(cps / cfg.step).astype(np.int64))
    if cp_steps.size and (cp_steps[0] < 1 or cp_steps[-1] > cfg.n_steps):
        raise ConfigError("checkpoints must lie in (0, horizon]")
    if cp_steps.size and max_cycles is not None:
        raise ConfigError("checkpoints cannot be combined with max_cycles "
                          "(frozen replicas would report stale integrals)")
    parts = _run_blocks(
        lambda bid, cnt: _regen_block(model, cfg, f, bid, cnt, cp_steps,
                                      max_cycles), cfg)
    samples = [s for block_samples, _, _ in parts for s in block_samples]
    additive = np.vstack([p[1] for p in parts]) if parts else np.zeros((0, 0))
    counts = np.vstack([p[2] for p in parts]) if parts else np.zeros((0, 0))
    return BatchResult(samples, cp_steps * cfg.step, additive, counts)


def simulate_path(model: DiffusionModel, cfg: SimConfig, f) -> RegenerationSample:
    """Single-path convenience wrapper: replica 0 of the batch layout."""
    one = replace(cfg, replicas=1)
    return simulate_paths(model, one, f).samples[0]


# -- estimators ---------------------------------------------------------------

def _batch_se(values: np.ndarray, n_batches: int = 32) -> float:
    """Standard error of the mean by batch means over replica index."""
    n = values.size
    if n < 2:
        return math.inf
    nb = min(n_batches, n)
    means = np.array([np.mean(s) for s in np.array_split(values, nb)])
    return float(np.std(means, ddof=1) / math.sqrt(nb))


def estimate_hitting_moment(model: DiffusionModel, cfg: SimConfig, x0: float,
                            target: float, order: int,
                            second_target: float | None = None
                            ) -> HittingEstimate:
    """Monte Carlo E_x0 T^order for the hit of ``target`` (or the two-sided
    exit when ``second_target`` is given).

    Censored replicas (no hit by the horizon) are excluded and reported; a
    censored fraction at or above 50% raises ExcessCensoringError.
    """
    if order < 1:
        raise DomainError("order must be >= 1")
    ests = estimate_hitting_moments(model, cfg, x0, target, (order,),
                                    second_target)
    return ests[0]


def estimate_hitting_moments(model: DiffusionModel, cfg: SimConfig, x0: float,
                             target: float, orders, second_target=None
                             ) -> list[HittingEstimate]:
    """Shared-sample estimates for several moment orders at once."""
    orders = [int(k) for k in orders]
    if any(k < 1 for k in orders):
        raise DomainError("orders must be >= 1")
    barriers = (float(target),) if second_target is None \
        else (float(target), float(second_target))
    if x0 in barriers:
        return [HittingEstimate(0.0, 0.0, 0.0, k, cfg.replicas, False)
                for k in orders]
    times = _simulate_hitting_times(model, cfg, x0, barriers)
    censored = np.isnan(times)
    frac = float(np.mean(censored))
    if frac >= 0.5:
        raise ExcessCensoringError(
            f"{frac:.0%} of replicas censored at horizon {cfg.horizon:g}")
    good = times[~censored]
    out = []
    for k in orders:
        powers = good ** k
        out.append(HittingEstimate(
            estimate=float(np.mean(powers)),
            stderr=_batch_se(powers),
            censored_fraction=frac,
            order=k,
            n_used=good.size,
            lower_bias_possible=frac > 0.0,
        ))
    return out


def _probe_support(f, lo: float, hi: float, n: int = 4096):
    fv = vectorize_integrand(f)
    xs = np.linspace(lo, hi, n)
    nz = np.abs(fv(xs)) > 0
    if not nz.any():
        return None
    return float(xs[nz][0]), float(xs[nz][-1])


def estimate_constants(model: DiffusionModel, cfg: SimConfig, f, p: float,
                       f_support: tuple | None = None,
                       support_grid_points: int = 5,
                       first_block_replicas: int | None = None
                       ) -> MomentEstimates:
    """Estimate every cycle-moment input of the deviation bounds.

    The cycle rate is total completed cycles over total simulated time; the
    mean-cycle identity and the invariant-average identity then hold up to
    Monte Carlo error and a renewal edge effect of order (cycle length) /
    horizon.  The cycle-integral constant is the max over a start-point grid
    in the support of f of the mean first-block integral of |f|.
    """
    if p <= 1:
        raise DomainError("need p > 1")
    batch = simulate_paths(model, cfg, f)
    samples = [s for s in batch.samples if len(s.r_times) >= 2]
    lacking = len(batch.samples) - len(samples)
    if lacking > 0.02 * len(batch.samples):
        raise InsufficientCyclesError(
            f"{lacking}/{len(batch.samples)} replicas completed fewer than "
            "2 cycles; extend the horizon")
    # a sub-2% remainder is dropped (trimming a little long-cycle mass;
    # size the horizon so this stays at zero when the moments matter)

    n_t = np.array([s.n_t for s in samples], dtype=float)
    l_hat = float(np.sum(n_t) / (len(samples) * cfg.horizon))
    l_se = _batch_se(n_t / cfg.horizon)
    inv_l = 1.0 / l_hat

    r1 = np.array([s.r_times[0] for s in samples])
    gap12 = np.array([s.r_times[1] - s.r_times[0] for s in samples])
    all_gaps = np.concatenate([np.diff(s.r_times) for s in samples])
    all_cycles_f = np.concatenate([s.cycle_integrals for s in samples])

    r1_halfp = r1 ** (p / 2.0)
    r1_centered = np.abs(r1 - inv_l) ** (p / 2.0)
    eta = np.abs(gap12 - inv_l) ** p
    gap_p_pooled = all_gaps ** p
    gap_p_first = gap12 ** p

    xi_mean = float(np.mean(all_cycles_f))
    xi_se = _batch_se(all_cycles_f)
    mu_hat = xi_mean * l_hat
    mu_se = math.hypot(xi_se * l_hat, xi_mean * l_se)

    # cycle-integral constant over a start grid in supp f; skipped when the
    # caller sets support_grid_points=0 (bounds that do not need it)
    support = f_support
    if support is None and support_grid_points > 0:
        span = 5.0 * (cfg.b - cfg.a)
        support = _probe_support(f, cfg.a - span, cfg.b + span)
    if support_grid_points == 0:
        c_f = Estimate(math.nan, math.nan)
    elif support is None:
        c_f = Estimate(0.0, 0.0)
    else:
        n_first = first_block_replicas or max(200, cfg.replicas // 4)
        best = Estimate(-math.inf, 0.0)
        for x_start in np.linspace(support[0], support[1],
                                   support_grid_points):
            sub = replace(cfg, replicas=n_first,
                          initial=InitialLaw.point(float(x_start)),
                          seed=cfg.seed + 1)
            fb = simulate_paths(model, sub, f, max_cycles=1)
            vals = np.array([s.first_block_abs for s in fb.samples])
            vals = vals[np.isfinite(vals)]
            if vals.size < 2:
                raise InsufficientCyclesError(
                    f"first-block runs from x={x_start:g} rarely regenerate "
                    "within the horizon")
            est = Estimate(float(np.mean(vals)), _batch_se(vals))
            if est.value > best.value:
                best = est
        c_f = best

    return MomentEstimates(
        p=p,
        l_hat=Estimate(l_hat, l_se),
        r1_centered_halfp=Estimate(float(np.mean(r1_centered)),
                                   _batch_se(r1_centered)),
        r1_halfp=Estimate(float(np.mean(r1_halfp)), _batch_se(r1_halfp)),
        eta_p=Estimate(float(np.mean(eta)), _batch_se(eta)),
        r1_p_at_a=Estimate(float(np.mean(gap_p_pooled)),
                           _batch_se(gap_p_pooled)),
        cycle_gap_p=Estimate(float(np.mean(gap_p_first)),
                             _batch_se(gap_p_first)),
        c_f_hat=c_f,
        mu_f_hat=Estimate(mu_hat, mu_se),
        mean_cycle_time=Estimate(float(np.mean(all_gaps)), _batch_se(all_gaps)),
        n_cycles=int(all_gaps.size),
    )


def estimate_deviation_prob(model: DiffusionModel, cfg: SimConfig, f,
                            t_grid, eps_grid, mu_f: float
                            ) -> EmpiricalDeviation:
    """Empirical P(|t^-1 int_0^t f - mu(f)| > eps) over a (t, eps) grid.

    Binomial 95% half-widths; zero-count cells get the rule-of-three width
    3/n.  The horizon must cover max(t_grid).
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    eps_grid = np.asarray(sorted(eps_grid), dtype=float)
    if t_grid.size == 0 or eps_grid.size == 0:
        raise ConfigError("t_grid and eps_grid must be nonempty")
    if t_grid[-1] > cfg.horizon + 1e-9:
        raise ConfigError("horizon shorter than max(t_grid)")
    if cfg.replicas < 100:
        raise ConfigError("deviation estimation needs >= 100 replicas")
    batch = simulate_paths(model, cfg, f, checkpoints=t_grid)
    times = batch.checkpoints  # snapped to the step grid, duplicates merged
    n = cfg.replicas
    freq = np.zeros((times.size, eps_grid.size))
    hw = np.zeros_like(freq)
    for i, t in enumerate(times):
        avg = batch.additive_at[:, i] / t
        dev = np.abs(avg - mu_f)
        for j, eps in enumerate(eps_grid):
            phat = float(np.mean(dev > eps))
            freq[i, j] = phat
            if 0.0 < phat < 1.0:
                hw[i, j] = 1.96 * math.sqrt(phat * (1 - phat) / n)
            else:
                hw[i, j] = 3.0 / n
    return EmpiricalDeviation(times, eps_grid, freq, hw, n)


def nu_moment_estimate(law: InitialLaw, exponent: float, n: int = 20000,
                       seed: int = 0) -> Estimate:
    """Empirical int |x|^exponent dnu from the law's own sampler."""
    gen = _stream(seed, 0, _KIND_AUX, 0)
    xs = law.sample(gen, n)
    vals = np.abs(xs) ** exponent
    return Estimate(float(np.mean(vals)), _batch_se(vals))


def write_samples_csv(samples, path, header_extra: str = "") -> None:
    """One row per completed cycle with per-replica summary columns."""
    import csv as _csv
    with open(path, "w", newline="") as fh:
        if header_extra:
            fh.write(f"# {header_extra}\n")
        w = _csv.writer(fh)
        w.writerow(["replica", "cycle", "r_time", "cycle_integral",
                    "n_t", "additive_integral", "first_block_integral"])
        for g, s in enumerate(samples):
            if len(s.r_times) == 0:
                w.writerow([g, "", "", "", s.n_t,
                            repr(s.additive_integral), ""])
                continue
            for ci, rt in enumerate(s.r_times):
                xi = s.cycle_integrals[ci - 1] if 1 <= ci <= len(s.cycle_integrals) \
                    else ""
                w.writerow([
                    g, ci, repr(float(rt)),
                    repr(float(xi)) if xi != "" else "",
                    s.n_t, repr(s.additive_integral),
                    repr(s.first_block_integral)
                    if math.isfinite(s.first_block_integral) else "",
                ])
