"""Monte Carlo sampling of (state, jump-time) trajectories.

Paths are drawn jointly: each step picks the pair (next state, increment)
by inverse-CDF lookup over the flattened, mass-renormalized kernel row of
the current state, so the truncated kernel is sampled exactly with no
rejection loop.  Per-path generator streams are derived from
(seed, initial state, path index), which makes every estimate
deterministic and independent of scheduling or worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError
from .kernel import SemiMarkovKernel

__all__ = [
    "PathSample",
    "CountingSnapshot",
    "EstimatorReport",
    "Target",
    "sample_path",
    "counting",
    "estimate",
    "estimate_many",
]

QUANTITIES = ("P", "U", "G", "mu", "mu_cross")


@dataclass(frozen=True)
class PathSample:
    """One trajectory: visited states and d-dimensional jump times.

    ``jump_times[0]`` is the zero vector; every later jump dominates its
    predecessor with strict growth in at least one coordinate.  The path
    stops at the last jump still inside the horizon box.
    """

    states: np.ndarray
    jump_times: np.ndarray
    horizon: tuple[int, ...]
    n_states: int


@dataclass(frozen=True)
class CountingSnapshot:
    """Jump and visit counts of one path at a grid point."""

    total: int
    marginal: np.ndarray
    visits: np.ndarray
    visits_marginal: np.ndarray


@dataclass(frozen=True)
class EstimatorReport:
    """Point estimate with its standard error and censoring metadata."""

    quantity: str
    at: dict
    estimate: float
    stderr: float
    n: int
    censored_fraction: float = 0.0

    def to_json(self) -> str:
        est = None if math.isnan(self.estimate) else self.estimate
        err = None if math.isnan(self.stderr) else self.stderr
        return json.dumps(
            {
                "quantity": self.quantity,
                "at": self.at,
                "estimate": est,
                "stderr": err,
                "n": self.n,
                "censored_fraction": self.censored_fraction,
            }
        )


@dataclass(frozen=True)
class Target:
    """One quantity to estimate.

    ``quantity`` is "P", "U", "G" (needs states i, j and grid point
    ``at``), "mu" (states i, j and 1-based dimension u), or "mu_cross"
    (state j and dimensions u, v).  States are 0-based.
    """

    quantity: str
    i: Optional[int] = None
    j: Optional[int] = None
    at: Optional[tuple[int, ...]] = None
    u: Optional[int] = None
    v: Optional[int] = None

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ArgumentError(f"unknown quantity {self.quantity!r}")
        if self.quantity in ("P", "U", "G"):
            if self.i is None or self.j is None or self.at is None:
                raise ArgumentError(f"{self.quantity} needs i, j and a grid point")
            object.__setattr__(self, "at", tuple(int(x) for x in self.at))
        elif self.quantity == "mu":
            if self.i is None or self.j is None or self.u is None:
                raise ArgumentError("mu needs i, j and a dimension index")
        else:
            if self.j is None or self.u is None or self.v is None:
                raise ArgumentError("mu_cross needs j and two dimension indices")

    @property
    def initial_state(self) -> int:
        return self.j if self.quantity == "mu_cross" else self.i

    def location(self) -> dict:
        out = {}
        for name in ("i", "j", "u", "v"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.at is not None:
            out["k"] = list(self.at)
        return out


class _RowSampler:
    """Inverse-CDF tables over the flattened kernel rows."""

    def __init__(self, kernel: SemiMarkovKernel):
        vals = kernel.seq.values
        s = kernel.s
        self.flat_shape = kernel.grid.shape + (s,)
        self.cums = []
        for i in range(s):
            flat = np.ascontiguousarray(vals[..., i, :]).ravel()
            cum = np.cumsum(flat)
            self.cums.append(cum / cum[-1])

    def draw(self, state: int, rng: np.random.Generator):
        idx = int(np.searchsorted(self.cums[state], rng.random(), side="right"))
        multi = np.unravel_index(idx, self.flat_shape)
        return int(multi[-1]), np.array(multi[:-1], dtype=np.int64)


def _check_horizon(kernel: SemiMarkovKernel, horizon) -> tuple[int, ...]:
    horizon = tuple(int(h) for h in horizon)
    if len(horizon) != kernel.d:
        raise ArgumentError(
            f"horizon has {len(horizon)} coordinates, kernel has {kernel.d}"
        )
    if any(h < 0 for h in horizon):
        raise ArgumentError("horizon coordinates must be nonnegative")
    if any(h > b for h, b in zip(horizon, kernel.grid.bounds)):
        raise ArgumentError(
            f"horizon {horizon} outside kernel grid {kernel.grid.bounds}"
        )
    return horizon


def _draw_initial(initial, s: int, rng: np.random.Generator) -> int:
    if np.ndim(initial) == 0:
        state = int(initial)
        if not 0 <= state < s:
            raise ArgumentError(f"initial state {state} outside 0..{s - 1}")
        return state
    dist = np.asarray(initial, dtype=np.float64)
    if dist.shape != (s,) or (dist < 0).any():
        raise ArgumentError("initial distribution must be a nonnegative s-vector")
    cum = np.cumsum(dist)
    return int(np.searchsorted(cum / cum[-1], rng.random(), side="right"))


def _walk(
    sampler: _RowSampler,
    state: int,
    horizon: tuple[int, ...],
    rng: np.random.Generator,
    d: int,
):
    states = [state]
    times = [np.zeros(d, dtype=np.int64)]
    cur = times[0]
    lim = np.asarray(horizon, dtype=np.int64)
    while True:
        nxt_state, step = sampler.draw(state, rng)
        nxt = cur + step
        if (nxt > lim).any():
            break
        states.append(nxt_state)
        times.append(nxt)
        state, cur = nxt_state, nxt
    return np.array(states, dtype=np.int64), np.array(times, dtype=np.int64)


def sample_path(
    kernel: SemiMarkovKernel, initial, horizon, rng_seed: int
) -> PathSample:
    """Draw one trajectory; deterministic given the seed.

    ``initial`` is a 0-based state or a distribution over states; jumps
    are appended until the next one would leave the horizon box.
    """
    if kernel.allow_instantaneous:
        raise ArgumentError(
            "cannot sample a kernel that allows instantaneous transitions"
        )
    horizon = _check_horizon(kernel, horizon)
    sampler = _RowSampler(kernel)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    state = _draw_initial(initial, kernel.s, rng)
    states, times = _walk(sampler, state, horizon, rng, kernel.d)
    states.setflags(write=False)
    times.setflags(write=False)
    return PathSample(states, times, horizon, kernel.s)


def counting(path: PathSample, k) -> CountingSnapshot:
    """Jump counts and per-state visit counts at grid point ``k <= horizon``.

    The joint count is the number of jumps dominated by k; marginal
    counts use one coordinate only.  Visit counts include the state at
    step 0.
    """
    k = tuple(int(x) for x in k)
    if len(k) != len(path.horizon):
        raise ArgumentError(f"point has {len(k)} coordinates, path has "
                            f"{len(path.horizon)}")
    if any(a > b for a, b in zip(k, path.horizon)):
        raise ArgumentError(f"point {k} is beyond the path horizon {path.horizon}")
    times = path.jump_times
    karr = np.asarray(k, dtype=np.int64)
    total = int((times[1:] <= karr).all(axis=1).sum())
    marginal = (times[1:] <= karr).sum(axis=0)
    s = path.n_states
    visits = np.bincount(path.states[: total + 1], minlength=s)
    visits_marginal = np.empty((s, len(k)), dtype=np.int64)
    for u in range(len(k)):
        visits_marginal[:, u] = np.bincount(
            path.states[: int(marginal[u]) + 1], minlength=s
        )
    return CountingSnapshot(total, marginal, visits, visits_marginal)


def _path_values(
    path_states: np.ndarray, path_times: np.ndarray, targets: Sequence[Target]
) -> list[float]:
    """Per-path statistic for each target; NaN marks a censored value."""
    out = []
    for t in targets:
        if t.quantity in ("P", "U", "G"):
            karr = np.asarray(t.at, dtype=np.int64)
            inside = (path_times[1:] <= karr).all(axis=1)
            n_k = int(inside.sum())
            if t.quantity == "P":
                out.append(1.0 if path_states[n_k] == t.j else 0.0)
            elif t.quantity == "U":
                out.append(float((path_states[: n_k + 1] == t.j).sum()))
            else:
                hits = np.nonzero(path_states[1:] == t.j)[0]
                out.append(
                    1.0 if hits.size and inside[hits[0]] else 0.0
                )
        else:
            hits = np.nonzero(path_states[1:] == t.j)[0]
            if not hits.size:
                out.append(math.nan)
            elif t.quantity == "mu":
                out.append(float(path_times[1 + hits[0], t.u - 1]))
            else:
                hit_time = path_times[1 + hits[0]]
                out.append(float(hit_time[t.u - 1]) * float(hit_time[t.v - 1]))
    return out


def _simulate_block(
    kernel: SemiMarkovKernel,
    init: int,
    targets: tuple[Target, ...],
    rng_seed: int,
    start: int,
    stop: int,
    horizon: tuple[int, ...],
) -> np.ndarray:
    sampler = _RowSampler(kernel)
    d = kernel.d
    vals = np.empty((stop - start, len(targets)))
    for idx in range(start, stop):
        seq = np.random.SeedSequence((rng_seed, init, idx))
        rng = np.random.Generator(np.random.PCG64(seq))
        states, times = _walk(sampler, init, horizon, rng, d)
        vals[idx - start] = _path_values(states, times, targets)
    return vals


def _resolve_workers(workers: Optional[int]) -> int:
    cap = int(os.environ.get("MTMRC_THREADS", "1"))
    if workers is None:
        workers = cap
    return max(1, min(workers, cap))


def estimate_many(
    kernel: SemiMarkovKernel,
    targets: Sequence[Target],
    n_paths: int,
    rng_seed: int,
    horizon,
    workers: Optional[int] = None,
) -> list[EstimatorReport]:
    """Estimate several quantities, reusing paths per initial state.

    ``n_paths`` trajectories are drawn for every initial state that an
    estimate conditions on.  The MTMRC_THREADS environment variable caps
    the worker count; results do not depend on how work is split.
    """
    if n_paths < 100:
        raise ArgumentError(f"need at least 100 paths, got {n_paths}")
    if kernel.allow_instantaneous:
        raise ArgumentError(
            "cannot sample a kernel that allows instantaneous transitions"
        )
    horizon = _check_horizon(kernel, horizon)
    targets = tuple(targets)
    for t in targets:
        if t.at is not None and any(
            a > b for a, b in zip(t.at, horizon)
        ):
            raise ArgumentError(f"target point {t.at} beyond horizon {horizon}")
        for dim in (t.u, t.v):
            if dim is not None and not 1 <= dim <= kernel.d:
                raise ArgumentError(f"dimension index {dim} outside 1..{kernel.d}")

    workers = _resolve_workers(workers)
    groups: dict[int, list[int]] = {}
    for pos, t in enumerate(targets):
        state = t.initial_state
        if not 0 <= state < kernel.s:
            raise ArgumentError(f"state {state} outside 0..{kernel.s - 1}")
        groups.setdefault(state, []).append(pos)

    reports: list[Optional[EstimatorReport]] = [None] * len(targets)
    for init, positions in sorted(groups.items()):
        sub_targets = tuple(targets[p] for p in positions)
        if workers == 1:
            vals = _simulate_block(
                kernel, init, sub_targets, rng_seed, 0, n_paths, horizon
            )
        else:
            edges = np.linspace(0, n_paths, workers + 1, dtype=int)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(
                        _simulate_block, kernel, init, sub_targets,
                        rng_seed, int(a), int(b), horizon,
                    )
                    for a, b in zip(edges[:-1], edges[1:])
                    if b > a
                ]
                vals = np.concatenate([f.result() for f in futures])
        for col, pos in enumerate(positions):
            reports[pos] = _reduce(targets[pos], vals[:, col], n_paths)
    return reports


def _reduce(target: Target, values: np.ndarray, n_paths: int) -> EstimatorReport:
    good = values[~np.isnan(values)]
    n = good.size
    censored = 1.0 - n / n_paths
    if n == 0:
        return EstimatorReport(
            target.quantity, target.location(), math.nan, math.nan, 0, censored
        )
    mean = float(good.mean())
    stderr = float(good.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return EstimatorReport(
        target.quantity, target.location(), mean, stderr, n, censored
    )


def estimate(
    kernel: SemiMarkovKernel,
    quantity: str,
    n_paths: int,
    rng_seed: int,
    horizon,
    **location,
) -> EstimatorReport:
    """Single-quantity estimator; see :class:`Target` for the location
    fields each quantity needs."""
    target = Target(quantity, **location)
    return estimate_many(kernel, [target], n_paths, rng_seed, horizon)[0]
