"""Closed-form laws of the diffusion's local time at first-passage times.

All laws are quenched (the potential W is held fixed) and expressed through
the scale values s(.) and the potential at the observation site a:

* full local time at site a up to the first passage of b > a:
  exponential with rate  lambda = exp(W(a)) / (2*(s(b) - s(a))).

* increment of the local time at a between the passages of b and c
  (a <= b < c): a mixture with an atom at zero,

      f(t) = alpha * delta_0(t) + (1 - alpha) * lambda * exp(-lambda*t),

  where lambda = exp(W(a)) / (2*(s(c) - s(a))) and
  alpha = (s(b) - s(a)) / (s(c) - s(a)).  The atom is the probability that
  the path never revisits a between the two passages, which equals the
  gambler's-ruin probability of hitting s(c) before s(a) from s(b).

The atom is carried structurally (a separate mass channel), never as a
numeric spike, so tests can do exact atom arithmetic.  The transform
convention is E[exp(-t*X)] for t >= 0 throughout; no analytic continuation
to t < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Environment, eval_w
from .scale import ScaleMap, eval_scale


@dataclass(frozen=True)
class PassageLaw:
    """Exponential law of the full local time at first passage; field: rate."""

    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")


@dataclass(frozen=True)
class IncrementLaw:
    """Atom-plus-exponential mixture law of a local-time increment.

    ``rate`` is the exponential rate of the continuous part, ``atom`` the
    probability mass at exactly zero.
    """

    rate: float
    atom: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")
        if not (0.0 <= self.atom < 1.0):
            raise ValueError(f"atom mass must lie in [0, 1), got {self.atom}")


def _check_sites(env: Environment, *pts: float) -> None:
    lo, hi = env.grid.x_min, env.grid.x_max
    for p in pts:
        if not (lo < p < hi):
            raise ValueError(f"site {p} must lie strictly inside ({lo}, {hi})")


def passage_law(sm: ScaleMap, env: Environment, a: float, b: float) -> PassageLaw:
    """Law of the local time at a accumulated up to the first passage of b."""
    if not (0.0 < a < b):
        raise ValueError(f"sites must satisfy 0 < a < b, got a={a}, b={b}")
    _check_sites(env, a, b)
    gap = eval_scale(sm, env, b) - eval_scale(sm, env, a)
    return PassageLaw(rate=math.exp(eval_w(env, a)) / (2.0 * gap))


def increment_law(sm: ScaleMap, env: Environment, a: float, b: float, c: float) -> IncrementLaw:
    """Law of the local-time increment at a between the passages of b and c.

    a = b is admitted as the degenerate atom-free case, which reduces to the
    passage law at (a, c).
    """
    if not (0.0 < a <= b < c):
        raise ValueError(f"sites must satisfy 0 < a <= b < c, got a={a}, b={b}, c={c}")
    _check_sites(env, a, b, c)
    s_a = eval_scale(sm, env, a)
    s_b = eval_scale(sm, env, b)
    s_c = eval_scale(sm, env, c)
    span = s_c - s_a
    return IncrementLaw(
        rate=math.exp(eval_w(env, a)) / (2.0 * span),
        atom=(s_b - s_a) / span,
    )


def increment_density(law: IncrementLaw, t: float) -> tuple[float, float]:
    """Density split into (atom mass at this point, continuous part value).

    The atom mass is reported only at t = 0; the continuous part is
    (1 - alpha) * lambda * exp(-lambda*t).  t < 0 is rejected.
    """
    if t < 0:
        raise ValueError(f"density is supported on t >= 0, got t={t}")
    atom = law.atom if t == 0.0 else 0.0
    return atom, law.rate * (1.0 - law.atom) * math.exp(-law.rate * t)


def increment_cdf(law: IncrementLaw, t):
    """Right-continuous CDF: 0 for t < 0, alpha + (1-alpha)(1 - e^{-lambda t}) else.

    Accepts scalars or arrays; the jump at 0 has size alpha.
    """
    ts = np.asarray(t, dtype=float)
    vals = np.where(
        ts < 0.0,
        0.0,
        law.atom + (1.0 - law.atom) * (-np.expm1(-law.rate * np.maximum(ts, 0.0))),
    )
    if ts.ndim == 0:
        return float(vals)
    return vals


def increment_mgf(law: IncrementLaw, t):
    """Transform E[exp(-t*X)] = alpha + (1-alpha) * lambda/(lambda+t), t >= 0."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0.0):
        raise ValueError("transform argument must be >= 0")
    vals = law.atom + (1.0 - law.atom) * law.rate / (law.rate + ts)
    if ts.ndim == 0:
        return float(vals)
    return vals


def mgf_scale_form(sm: ScaleMap, env: Environment, a: float, b: float, c: float, t) -> float:
    """The increment transform written directly in scale values,

        (e^{W(a)} + 2t(s(b)-s(a))) / (e^{W(a)} + 2t(s(c)-s(a))),

    kept separate from :func:`increment_mgf` for cross-validation: the two
    agree to roundoff as an algebraic identity.
    """
    if not (0.0 < a <= b < c):
        raise ValueError(f"sites must satisfy 0 < a <= b < c, got a={a}, b={b}, c={c}")
    _check_sites(env, a, b, c)
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0.0):
        raise ValueError("transform argument must be >= 0")
    ew = math.exp(eval_w(env, a))
    s_a = eval_scale(sm, env, a)
    num = ew + 2.0 * ts * (eval_scale(sm, env, b) - s_a)
    den = ew + 2.0 * ts * (eval_scale(sm, env, c) - s_a)
    vals = num / den
    if ts.ndim == 0:
        return float(vals)
    return vals


def increment_moment(sm: ScaleMap, env: Environment, a: float, b: float, c: float, n: int) -> float:
    """n-th raw moment of the increment,

        n! * [2(s(c)-s(b))/e^{W(a)}] * [2(s(c)-s(a))/e^{W(a)}]^{n-1},

    for strictly ordered 0 < a < b < c and integer n >= 1.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"moment order must be an integer >= 1, got {n!r}")
    if not (0.0 < a < b < c):
        raise ValueError(f"sites must satisfy 0 < a < b < c, got a={a}, b={b}, c={c}")
    _check_sites(env, a, b, c)
    ew = math.exp(eval_w(env, a))
    s_a = eval_scale(sm, env, a)
    s_b = eval_scale(sm, env, b)
    s_c = eval_scale(sm, env, c)
    return math.factorial(int(n)) * (2.0 * (s_c - s_b) / ew) * (2.0 * (s_c - s_a) / ew) ** (n - 1)


def expected_increment_profile(
    sm: ScaleMap, env: Environment, b: float, c: float, a_grid
) -> np.ndarray:
    """Expected increment as a function of the site a: 2(s(c)-s(b)) * e^{-W(a)}.

    The scale factor does not depend on a, so the profile is a monotone
    transform of -W: profile(a)/profile(a') = exp(W(a') - W(a)).
    """
    a_arr = np.asarray(a_grid, dtype=float)
    if a_arr.size == 0:
        raise ValueError("a_grid must be non-empty")
    if not (0.0 < b < c):
        raise ValueError(f"passage levels must satisfy 0 < b < c, got b={b}, c={c}")
    _check_sites(env, b, c)
    if np.any(a_arr <= 0.0) or np.any(a_arr >= b):
        raise ValueError("every profile site must lie strictly inside (0, b)")
    factor = 2.0 * (eval_scale(sm, env, c) - eval_scale(sm, env, b))
    return factor * np.exp(-eval_w(env, a_arr))


def favorite_point(env: Environment, a_grid, profile) -> float:
    """Site maximizing the expected-increment profile; ties go to the smallest a.

    Because the profile is a positive constant times exp(-W(a)), this is
    exactly the site minimizing W over the grid (same tie-break).
    """
    a_arr = np.asarray(a_grid, dtype=float)
    p_arr = np.asarray(profile, dtype=float)
    if a_arr.size == 0:
        raise ValueError("a_grid must be non-empty")
    if a_arr.shape != p_arr.shape:
        raise ValueError("a_grid and profile must have matching shapes")
    best = np.flatnonzero(p_arr == p_arr.max())
    return float(a_arr[best[np.argmin(a_arr[best])]])


def sample_passage(law: PassageLaw, rng: np.random.Generator, size=None):
    """Draw from the passage law by inversion: -log(1-U)/lambda."""
    u = rng.random(size)
    vals = -np.log1p(-u) / law.rate
    if size is None:
        return float(vals)
    return vals


def sample_increment(law: IncrementLaw, rng: np.random.Generator, size=None):
    """Draw from the mixture: exactly 0.0 with probability alpha, else Exp(lambda).

    Two uniforms are consumed per draw (atom coin first) so the stream layout
    is independent of the outcome.
    """
    u_atom = rng.random(size)
    u_exp = rng.random(size)
    vals = np.where(u_atom < law.atom, 0.0, -np.log1p(-u_exp) / law.rate)
    if size is None:
        return float(vals)
    return vals


def law_summary(law: PassageLaw | IncrementLaw) -> dict:
    """JSON-ready law summary {"lambda": rate, "alpha": atom}."""
    atom = law.atom if isinstance(law, IncrementLaw) else 0.0
    return {"lambda": law.rate, "alpha": atom}


def write_density_csv(law: IncrementLaw, path, t_max: float, points: int) -> None:
    """Density curve as CSV ``t,atom,density`` on a uniform t grid from 0."""
    if points < 2 or t_max <= 0:
        raise ValueError("need t_max > 0 and at least two points")
    with open(path, "w") as f:
        f.write("t,atom,density\n")
        for t in np.linspace(0.0, t_max, points):
            atom, dens = increment_density(law, float(t))
            f.write(f"{float(t)!r},{atom!r},{dens!r}\n")


def write_cdf_csv(law: IncrementLaw, path, t_max: float, points: int) -> None:
    """CDF curve as CSV ``t,cdf`` on a uniform t grid from 0."""
    if points < 2 or t_max <= 0:
        raise ValueError("need t_max > 0 and at least two points")
    with open(path, "w") as f:
        f.write("t,cdf\n")
        for t in np.linspace(0.0, t_max, points):
            f.write(f"{float(t)!r},{increment_cdf(law, float(t))!r}\n")


def write_moments_csv(sm: ScaleMap, env: Environment, a: float, b: float, c: float, n_max: int, path) -> None:
    """Moment table as CSV ``n,moment`` for n = 1..n_max."""
    if n_max < 1:
        raise ValueError("need n_max >= 1")
    with open(path, "w") as f:
        f.write("n,moment\n")
        for n in range(1, n_max + 1):
            f.write(f"{n},{increment_moment(sm, env, a, b, c, n)!r}\n")
