"""Timing harness comparing convolution and inversion methods.

Absolute timings are hardware-specific; consumers should only rely on
the orderings and coarse speedup factors between rows of one suite.
All fixture randomness is seeded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .convolution import convolve_direct, convolve_fft
from .errors import ArgumentError
from .inversion import inverse_gauss_jordan, inverse_newton, inverse_recurrence
from .seqcore import Grid, MatrixSeq, _frozen

__all__ = [
    "BenchResult",
    "random_seq",
    "random_inv_input",
    "run_suite",
    "format_table",
    "SUITES",
]

SUITES = ("conv1d", "conv2d", "inv1d", "inv2d")


@dataclass(frozen=True)
class BenchResult:
    name: str
    replications: int
    elapsed: float
    relative: float


def random_seq(rng: np.random.Generator, grid: Grid, s: int) -> MatrixSeq:
    """Uniform[0, 1) matrix sequence."""
    return MatrixSeq(grid, s, _frozen(rng.random(grid.shape + (s, s))))


def random_inv_input(
    rng: np.random.Generator, grid: Grid, s: int, offmass: float = 0.9
) -> MatrixSeq:
    """Identity minus a random sub-stochastic sequence.

    The off-origin part is scaled so each row carries total mass
    ``offmass`` < 1, which keeps the inverse (a geometric-type series)
    bounded on any grid; this mirrors the renewal-density inversion
    workload.
    """
    vals = rng.random(grid.shape + (s, s))
    vals[(0,) * grid.d] = 0.0
    rowsum = vals.sum(axis=tuple(range(grid.d)) + (grid.d + 1,))
    vals *= (offmass / rowsum)[..., None]
    vals = -vals
    vals[(0,) * grid.d] += np.eye(s)
    return MatrixSeq(grid, s, _frozen(vals))


def _time(fn, reps: int) -> float:
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return time.perf_counter() - start


def _with_relative(rows: list[tuple[str, int, float]]) -> list[BenchResult]:
    best = min(elapsed for _, _, elapsed in rows)
    return [
        BenchResult(name, reps, elapsed, elapsed / best)
        for name, reps, elapsed in rows
    ]


def run_suite(suite: str, reps: int = 3, size: int | None = None,
              seed: int = 20240, s: int = 3) -> list[BenchResult]:
    """Time one suite and return rows with relative factors.

    ``size`` is the sequence length for 1-d suites and the per-dimension
    bound for 2-d suites; conv2d also times the FFT path on a grid four
    times larger per dimension, the cross-size comparison.
    """
    if suite not in SUITES:
        raise ArgumentError(f"unknown suite {suite!r}; choose from {SUITES}")
    rng = np.random.default_rng(seed)
    rows: list[tuple[str, int, float]] = []

    if suite == "conv1d":
        n = 512 if size is None else size
        A = random_seq(rng, Grid((n,)), s)
        rows.append(("direct", reps, _time(lambda: convolve_direct(A, A), reps)))
        rows.append(("fft", reps, _time(lambda: convolve_fft(A, A), reps)))
    elif suite == "conv2d":
        n = 31 if size is None else size
        big = 4 * (n + 1) - 1
        A = random_seq(rng, Grid((n, n)), s)
        B = random_seq(rng, Grid((big, big)), s)
        rows.append(
            (f"direct[{n},{n}]", reps, _time(lambda: convolve_direct(A, A), reps))
        )
        rows.append(
            (f"fft[{n},{n}]", reps, _time(lambda: convolve_fft(A, A), reps))
        )
        rows.append(
            (f"fft[{big},{big}]", reps, _time(lambda: convolve_fft(B, B), reps))
        )
    elif suite == "inv1d":
        n = 512 if size is None else size
        A = random_inv_input(rng, Grid((n,)), s)
        rows.append(
            ("recurrence", reps, _time(lambda: inverse_recurrence(A), reps))
        )
        rows.append(("newton", reps, _time(lambda: inverse_newton(A), reps)))
        rows.append(
            ("gauss-jordan", reps, _time(lambda: inverse_gauss_jordan(A), reps))
        )
    else:
        n = 32 if size is None else size
        A = random_inv_input(rng, Grid((n, n)), s)
        rows.append(
            ("recurrence", reps, _time(lambda: inverse_recurrence(A), reps))
        )
        rows.append(("newton", reps, _time(lambda: inverse_newton(A), reps)))
        rows.append(
            ("gauss-jordan", reps, _time(lambda: inverse_gauss_jordan(A), reps))
        )
    return _with_relative(rows)


def format_table(results: list[BenchResult]) -> str:
    lines = [
        f"{'Test':<18} {'Replications':>12} {'Elapsed (s)':>12} {'Relative':>10}"
    ]
    for r in results:
        lines.append(
            f"{r.name:<18} {r.replications:>12d} {r.elapsed:>12.4f} "
            f"{r.relative:>10.3f}"
        )
    return "\n".join(lines)
