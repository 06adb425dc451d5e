"""Monte Carlo engine for local times at first-passage times.

Simulation lives entirely in scale coordinates: the driving process is a
discrete Brownian walk (Gaussian steps of variance dt), first passages are
detected by grid crossing, and local times are occupation-time estimates
over a band of half-width eps.  Diffusion-side quantities follow from the
transfer L_X(tau(b), a) = exp(-W(a)) * L_B(sigma(s(b)), s(a)) and from the
time-change representation; no Euler scheme ever touches the informal SDE,
whose drift does not exist pointwise.

First-passage times of an unrestricted Brownian walk have infinite mean, so
no step budget makes a replicated batch reliable.  The passage and increment
samplers therefore reflect the walk at a floor placed ``floor_depth`` scale
units below the observation band.  Reflection below the band truncates only
the depth of downward excursions, never their count, so the law of the local
time at any level above the floor is exactly unchanged while the passage
time acquires a finite mean and an exponential tail.  Reflection uses the
fold ``floor + |free - floor|`` of the free walk, which equals the
sequentially reflected walk in law for symmetric steps and vectorizes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .environment import Environment, eval_w
from .errors import HorizonExceededError
from .scale import ScaleMap, eval_scale, inverse_scale

_BLOCK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    """Discretization parameters for the driving walk.

    dt is the time step of the scale-coordinate Brownian walk; ``bandwidth``
    is the local-time window half-width (defaults to sqrt(dt), which couples
    the two leading bias sources); ``max_steps`` caps a single path;
    ``floor_depth`` is how far below the observation band the reflecting
    floor sits, in scale units.
    """

    dt: float = 1e-4
    bandwidth: float | None = None
    max_steps: int = 100_000_000
    seed: int = 0
    floor_depth: float = 3.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.bandwidth is not None and not (
            math.isfinite(self.bandwidth) and self.bandwidth > 0
        ):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if not (math.isfinite(self.floor_depth) and self.floor_depth > 0):
            raise ValueError(f"floor_depth must be positive, got {self.floor_depth}")

    @property
    def eps(self) -> float:
        """Effective local-time band half-width."""
        return self.bandwidth if self.bandwidth is not None else math.sqrt(self.dt)


@dataclass(frozen=True)
class DrivingPath:
    """Recorded driving walk: positions b with b[0] = start.

    ``stop_index`` is the step at which the stop rule fired, so
    b[stop_index] is the first position at or beyond the target level.
    """

    dt: float
    b: np.ndarray
    stop_index: int


@dataclass(frozen=True)
class TimeChangeRecord:
    """Cumulative diffusion-time values T_k along a driving path; T_0 = 0."""

    t: np.ndarray


@dataclass(frozen=True)
class LocalTimeSample:
    """One Monte Carlo local-time observation.

    ``is_exact_zero`` marks a structural zero (the estimator never saw the
    relevant event at all), which implies value == 0.0 with no thresholding.
    """

    value: float
    is_exact_zero: bool
    config: SimConfig


def simulate_until_level(
    start: float,
    target: float,
    cfg: SimConfig,
    rng: np.random.Generator,
    reflect_at: float | None = None,
) -> DrivingPath:
    """Walk from start until the first step at or beyond the target level.

    Steps are N(0, dt) draws; for target > start the walk stops at the first
    position >= target, symmetrically for target < start.  ``reflect_at``
    installs a reflecting barrier on the far side of the target (a floor for
    upward runs, a ceiling for downward ones).  Exhausting ``max_steps``
    raises HorizonExceededError; paths are never silently truncated.
    """
    if target == start:
        raise ValueError("target must differ from start")
    up = target > start
    if reflect_at is not None:
        if up and not reflect_at < min(start, target):
            raise ValueError("reflecting floor must lie strictly below start and target")
        if not up and not reflect_at > max(start, target):
            raise ValueError("reflecting ceiling must lie strictly above start and target")
    sq = math.sqrt(cfg.dt)
    chunks = [np.array([start])]
    free_last = start
    steps = 0
    while steps < cfg.max_steps:
        n = min(_BLOCK, cfg.max_steps - steps)
        free = free_last + np.cumsum(rng.standard_normal(n) * sq)
        if reflect_at is None:
            pos = free
        elif up:
            pos = reflect_at + np.abs(free - reflect_at)
        else:
            pos = reflect_at - np.abs(free - reflect_at)
        hit = np.nonzero(pos >= target if up else pos <= target)[0]
        if hit.size:
            chunks.append(pos[: hit[0] + 1])
            b = np.concatenate(chunks)
            return DrivingPath(dt=cfg.dt, b=b, stop_index=b.size - 1)
        chunks.append(pos)
        free_last = free[-1]
        steps += n
    raise HorizonExceededError(
        f"no passage of level {target} from {start} within {cfg.max_steps} steps",
        steps=cfg.max_steps,
    )


def local_time_at_level(path: DrivingPath, level: float, cfg: SimConfig) -> LocalTimeSample:
    """Occupation-time estimate (dt/2eps) * #{k < stop_index : |b_k - level| < eps}."""
    eps = cfg.eps
    count = int(np.count_nonzero(np.abs(path.b[: path.stop_index] - level) < eps))
    return LocalTimeSample(
        value=count * path.dt / (2.0 * eps),
        is_exact_zero=(count == 0),
        config=cfg,
    )


def brox_passage_local_time(
    env: Environment,
    sm: ScaleMap,
    a: float,
    b: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> LocalTimeSample:
    """One sample of the diffusion's local time at a up to the first passage of b.

    Drive a walk from 0 to s(b) in scale coordinates and transfer the
    Brownian band estimate at s(a) with the factor exp(-W(a)).
    """
    if not (0.0 < a < b):
        raise ValueError(f"sites must satisfy 0 < a < b, got a={a}, b={b}")
    s_a = eval_scale(sm, env, a)
    s_b = eval_scale(sm, env, b)
    floor = min(0.0, s_a) - cfg.floor_depth
    path = simulate_until_level(0.0, s_b, cfg, rng, reflect_at=floor)
    lt = local_time_at_level(path, s_a, cfg)
    return LocalTimeSample(
        value=math.exp(-eval_w(env, a)) * lt.value,
        is_exact_zero=lt.is_exact_zero,
        config=cfg,
    )


def _increment_leg(
    start: float,
    target: float,
    s_a: float,
    weight: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[LocalTimeSample, float]:
    """Run one passage leg, returning the revisit-gated increment sample.

    The structural zero is the event that the walk reaches the target without
    ever entering (-inf, s_a]; on such legs the true increment is exactly
    zero, so band counts (near misses at distance < eps) are discarded.
    This makes the zero flag coincide pathwise with the gambler's-ruin
    no-revisit event on a shared stream.
    """
    floor = s_a - cfg.floor_depth
    path = simulate_until_level(start, target, cfg, rng, reflect_at=floor)
    revisit = bool(np.any(path.b <= s_a))
    if revisit:
        lt = local_time_at_level(path, s_a, cfg)
        sample = LocalTimeSample(value=weight * lt.value, is_exact_zero=False, config=cfg)
    else:
        sample = LocalTimeSample(value=0.0, is_exact_zero=True, config=cfg)
    return sample, float(path.b[path.stop_index])


def brox_increment_sample(
    env: Environment,
    sm: ScaleMap,
    a: float,
    b: float,
    c: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> LocalTimeSample:
    """One sample of the local-time increment at a between the passages of b and c.

    By the strong Markov property a fresh leg from s(b) to s(c) has the law
    of the increment; the zero flag is the no-revisit event {the leg hits
    s(c) before (-inf, s(a)]}, whose probability is the law's atom.
    """
    if not (0.0 < a < b < c):
        raise ValueError(f"sites must satisfy 0 < a < b < c, got a={a}, b={b}, c={c}")
    s_a = eval_scale(sm, env, a)
    s_b = eval_scale(sm, env, b)
    s_c = eval_scale(sm, env, c)
    weight = math.exp(-eval_w(env, a))
    sample, _ = _increment_leg(s_b, s_c, s_a, weight, cfg, rng)
    return sample


def sample_increment_pair(
    env: Environment,
    sm: ScaleMap,
    a: float,
    t1: float,
    t2: float,
    t3: float,
    t4: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[LocalTimeSample, LocalTimeSample]:
    """Increments over the disjoint passage windows [t1,t2] and [t3,t4].

    One continuous walk supplies both legs (the gap leg from t2 to t3 is
    simulated but not measured), so the pair genuinely tests the
    independent-increments property rather than building it in.
    """
    if not (0.0 < a < t1 < t2 < t3 < t4):
        raise ValueError("levels must satisfy 0 < a < t1 < t2 < t3 < t4")
    s_a = eval_scale(sm, env, a)
    s_vals = [eval_scale(sm, env, t) for t in (t1, t2, t3, t4)]
    weight = math.exp(-eval_w(env, a))
    floor = s_a - cfg.floor_depth
    first, pos = _increment_leg(s_vals[0], s_vals[1], s_a, weight, cfg, rng)
    gap = simulate_until_level(pos, s_vals[2], cfg, rng, reflect_at=floor)
    second, _ = _increment_leg(float(gap.b[gap.stop_index]), s_vals[3], s_a, weight, cfg, rng)
    return first, second


def gambler_ruin_no_revisit(
    s_a: float,
    s_b: float,
    s_c: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> bool:
    """True iff a walk from s_b reaches s_c before entering (-inf, s_a].

    The hit probability is the gambler's-ruin value (s_b-s_a)/(s_c-s_a): an
    independent realization of the increment law's atom.
    """
    if not (s_a < s_b < s_c):
        raise ValueError(f"need s_a < s_b < s_c, got {s_a}, {s_b}, {s_c}")
    sq = math.sqrt(cfg.dt)
    last = s_b
    steps = 0
    while steps < cfg.max_steps:
        n = min(_BLOCK, cfg.max_steps - steps)
        pos = last + np.cumsum(rng.standard_normal(n) * sq)
        up = np.nonzero(pos >= s_c)[0]
        dn = np.nonzero(pos <= s_a)[0]
        k_up = up[0] if up.size else n
        k_dn = dn[0] if dn.size else n
        if k_up < k_dn:
            return True
        if k_dn < k_up:
            return False
        last = pos[-1]
        steps += n
    raise HorizonExceededError(
        f"no exit from ({s_a}, {s_c}) within {cfg.max_steps} steps", steps=cfg.max_steps
    )


def build_time_change(env: Environment, sm: ScaleMap, path: DrivingPath) -> TimeChangeRecord:
    """Accumulate T_k = sum_{j<k} exp(-2 W(s^-1(b_j))) * dt (left endpoints).

    Every pre-stop position must lie inside the tabulated scale range.
    """
    pre = path.b[: path.stop_index]
    x = inverse_scale(sm, env, pre)
    dT = np.exp(-2.0 * eval_w(env, x)) * path.dt
    t = np.empty(path.stop_index + 1)
    t[0] = 0.0
    np.cumsum(dT, out=t[1:])
    return TimeChangeRecord(t=t)


def reconstruct_x_path(env: Environment, sm: ScaleMap, path: DrivingPath, t_grid) -> np.ndarray:
    """Diffusion positions at the requested times via the time change.

    For each t with T_k <= t < T_{k+1} returns s^-1(b_k).  Times at or beyond
    the path's accumulated T range raise HorizonExceededError.
    """
    ts = np.asarray(t_grid, dtype=float)
    if np.any(ts < 0.0):
        raise ValueError("reconstruction times must be >= 0")
    record = build_time_change(env, sm, path)
    t = record.t
    if np.any(ts >= t[-1]):
        raise HorizonExceededError(
            f"requested time beyond the path's accumulated range {t[-1]!r}; simulate further"
        )
    k = np.searchsorted(t, ts, side="right") - 1
    x = inverse_scale(sm, env, path.b[: path.stop_index])
    return x[k]


def child_rng(base_seed: int, replicate: int) -> np.random.Generator:
    """The deterministic generator of one replicate: child (replicate,) of base_seed."""
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(replicate,)))


def run_replicated(sampler, n_reps: int, base_seed: int, workers: int = 1) -> list:
    """Run ``sampler(rng)`` for n_reps deterministic child streams.

    Replicate r always uses ``child_rng(base_seed, r)``, so results are
    identical regardless of execution order or worker count.  Any replicate's
    horizon error fails the whole batch, re-raised with the replicate index.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")

    def job(r: int):
        try:
            return sampler(child_rng(base_seed, r))
        except HorizonExceededError as e:
            raise HorizonExceededError(
                f"replicate {r}: {e}", steps=e.steps, replicate=r
            ) from e

    if workers <= 1:
        return [job(r) for r in range(n_reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(n_reps)))


def sample_values(samples) -> np.ndarray:
    """Values of a batch of LocalTimeSample as an array."""
    return np.array([s.value for s in samples])


def sample_zero_flags(samples) -> np.ndarray:
    """Structural-zero flags of a batch of LocalTimeSample as a bool array."""
    return np.array([s.is_exact_zero for s in samples], dtype=bool)


def write_samples_csv(samples, path) -> None:
    """Dump a batch as CSV ``replicate,value,is_exact_zero``."""
    with open(path, "w") as f:
        f.write("replicate,value,is_exact_zero\n")
        for r, s in enumerate(samples):
            f.write(f"{r},{s.value!r},{'true' if s.is_exact_zero else 'false'}\n")
