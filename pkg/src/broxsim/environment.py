"""Random and deterministic potential landscapes on a uniform grid.

The potential W is held as exact values on a uniform grid with W(0) = 0 and
is piecewise linear between nodes.  Everything downstream (scale function,
speed density, closed-form laws) consumes W only through point evaluations
and per-cell integrals of exp(+-W), which have exact closed forms for the
piecewise-linear model.

A random environment is a two-sided Brownian motion sampled exactly at the
nodes: independent centered Gaussian increments of variance h on each side
of the origin, anchored at W(0) = 0.  The left and right halves use split
sub-seeds of the master seed so generation is reproducible and the halves
are independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EnvironmentFormatError, OutOfDomainError

# node-snap tolerance, as a fraction of one cell
_SNAP = 1e-9

ENV_SCHEMA_KEYS = {"x_min", "x_max", "h", "seed", "kind", "w"}


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [x_min, x_max] with spacing h and 0 exactly on a node.

    x_min and x_max must be (negative and positive) integer multiples of h;
    they are snapped to the exact multiples at construction so node
    coordinates are reproducible bit for bit.
    """

    x_min: float
    x_max: float
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"grid spacing must be positive and finite, got h={self.h}")
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not (self.x_min < 0 < self.x_max):
            raise ValueError(
                f"grid must straddle the origin: x_min={self.x_min}, x_max={self.x_max}"
            )
        k_min = round(self.x_min / self.h)
        k_max = round(self.x_max / self.h)
        if abs(k_min * self.h - self.x_min) > _SNAP * self.h or k_min >= 0:
            raise ValueError(
                f"x_min={self.x_min} is not a negative integer multiple of h={self.h}; "
                "0 must fall exactly on a grid node"
            )
        if abs(k_max * self.h - self.x_max) > _SNAP * self.h or k_max <= 0:
            raise ValueError(
                f"x_max={self.x_max} is not a positive integer multiple of h={self.h}; "
                "0 must fall exactly on a grid node"
            )
        object.__setattr__(self, "x_min", k_min * self.h)
        object.__setattr__(self, "x_max", k_max * self.h)

    @property
    def n_nodes(self) -> int:
        return round(self.x_max / self.h) - round(self.x_min / self.h) + 1

    @property
    def zero_index(self) -> int:
        return -round(self.x_min / self.h)

    def nodes(self) -> np.ndarray:
        """Node coordinates k*h; the entry at ``zero_index`` is exactly 0.0."""
        k_min = round(self.x_min / self.h)
        return (k_min + np.arange(self.n_nodes)) * self.h


@dataclass(frozen=True, eq=False)
class Environment:
    """A potential realization: grid, node values w, provenance tag and seed.

    Invariants: w has one finite entry per node and w = 0 exactly at x = 0.
    Instances are immutable (the array is locked) and safe to share across
    workers.
    """

    grid: GridSpec
    w: np.ndarray
    seed: int | None
    kind: str

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.w, dtype=float))
        if w.ndim != 1 or w.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"w must have {self.grid.n_nodes} entries (one per node), got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("potential values must all be finite")
        if w[self.grid.zero_index] != 0.0:
            raise ValueError("potential must vanish exactly at x=0")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.seed == other.seed
            and self.kind == other.kind
            and np.array_equal(self.w, other.w)
        )


def generate_two_sided_bm(grid: GridSpec, seed: int) -> Environment:
    """Sample a two-sided Brownian potential exactly at the grid nodes.

    Right of the origin the node values are a cumulative sum of independent
    N(0, h) increments; left of it an independent cumulative sum with
    mirrored indexing.  Deterministic given (grid, seed): the two halves use
    the two children of ``numpy.random.SeedSequence(seed)``.
    """
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    left_ss, right_ss = np.random.SeedSequence(int(seed)).spawn(2)
    n = grid.n_nodes
    z = grid.zero_index
    sd = math.sqrt(grid.h)
    w = np.zeros(n)
    n_right = n - 1 - z
    if n_right:
        inc = np.random.default_rng(right_ss).standard_normal(n_right) * sd
        w[z + 1 :] = np.cumsum(inc)
    if z:
        inc = np.random.default_rng(left_ss).standard_normal(z) * sd
        w[z - 1 :: -1] = np.cumsum(inc)
    return Environment(grid=grid, w=w, seed=int(seed), kind="two_sided_bm")


def deterministic_env(grid: GridSpec, kind: str, slope: float = 0.0) -> Environment:
    """Closed-form test potential: ``flat`` (w = 0) or ``linear`` (w = slope*x)."""
    if kind == "flat":
        return Environment(grid=grid, w=np.zeros(grid.n_nodes), seed=None, kind="flat")
    if kind == "linear":
        if not math.isfinite(slope):
            raise ValueError("slope must be finite")
        return Environment(
            grid=grid,
            w=slope * grid.nodes(),
            seed=None,
            kind=f"linear({slope!r})",
        )
    raise ValueError(f"unknown deterministic environment kind {kind!r}")


def _locate(grid: GridSpec, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map coordinates to (cell index, fractional offset) with node snapping.

    Coordinates within _SNAP of a node get frac exactly 0.0 or 1.0 so node
    lookups reproduce stored values bit for bit.
    """
    n = grid.n_nodes
    pos = (xs - grid.x_min) / grid.h
    if np.any(pos < -_SNAP) or np.any(pos > n - 1 + _SNAP):
        bad = xs[(pos < -_SNAP) | (pos > n - 1 + _SNAP)]
        raise OutOfDomainError(
            f"coordinate(s) {bad} outside grid domain [{grid.x_min}, {grid.x_max}]"
        )
    nearest = np.rint(pos)
    on_node = np.abs(pos - nearest) < _SNAP
    pos = np.where(on_node, nearest, pos)
    i = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
    frac = pos - i
    return i, frac


def eval_w(env: Environment, x):
    """Potential at x: linear interpolation between nodes, exact at nodes.

    Accepts a scalar or an array; raises OutOfDomainError outside the grid.
    """
    xs = np.asarray(x, dtype=float)
    i, frac = _locate(env.grid, np.atleast_1d(xs))
    w = env.w
    vals = w[i] * (1.0 - frac) + w[i + 1] * frac
    if xs.ndim == 0:
        return float(vals[0])
    return vals.reshape(xs.shape)


def save_env(env: Environment, path) -> None:
    """Write the environment as JSON with full round-trip float precision."""
    obj = {
        "x_min": env.grid.x_min,
        "x_max": env.grid.x_max,
        "h": env.grid.h,
        "seed": env.seed,
        "kind": env.kind,
        "w": env.w.tolist(),
    }
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def load_env(path) -> Environment:
    """Load and validate an environment file; the round trip is bit-identical.

    Rejects malformed JSON, schema mismatches, non-finite values and
    potentials with W(0) != 0.
    """
    try:
        with open(path) as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise EnvironmentFormatError(f"environment file {path} is not valid JSON: {e}") from e
    if not isinstance(obj, dict) or set(obj) != ENV_SCHEMA_KEYS:
        raise EnvironmentFormatError(
            f"environment file {path} must contain exactly the keys {sorted(ENV_SCHEMA_KEYS)}"
        )
    seed = obj["seed"]
    if seed is not None and not isinstance(seed, int):
        raise EnvironmentFormatError("seed must be an integer or null")
    if not isinstance(obj["kind"], str):
        raise EnvironmentFormatError("kind must be a string")
    if not isinstance(obj["w"], list):
        raise EnvironmentFormatError("w must be a list of numbers")
    try:
        grid = GridSpec(x_min=float(obj["x_min"]), x_max=float(obj["x_max"]), h=float(obj["h"]))
        return Environment(grid=grid, w=np.asarray(obj["w"], dtype=float), seed=seed, kind=obj["kind"])
    except (TypeError, ValueError) as e:
        raise EnvironmentFormatError(f"environment file {path} rejected: {e}") from e
