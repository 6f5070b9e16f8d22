"""Grid-truncated d-dimensional matrix sequences.

A sequence assigns one s-by-s real matrix to every point of a rectangular
integer grid ``[0, b_1] x ... x [0, b_d]``.  Values are stored densely in
row-major multi-index order; all objects are immutable after construction
and every operation is a pure function, so concurrent reads are safe.
Scalar sequences are the special case ``s == 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DimensionMismatchError

__all__ = [
    "Grid",
    "MatrixSeq",
    "make_identity",
    "make_ones_diag",
    "zeros_seq",
    "real_seq",
    "add",
    "sub",
    "scale",
    "restrict",
    "embed",
    "cumulative",
    "total_degrees",
    "seq_to_dict",
    "seq_from_dict",
    "save_seq",
    "load_seq",
]


@dataclass(frozen=True)
class Grid:
    """Rectangular index set ``{k : 0 <= k_u <= bounds[u]}`` in N^d.

    Parameters
    ----------
    bounds : tuple of int
        Inclusive upper corner (k_1, ..., k_d); every entry nonnegative.
    """

    bounds: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple(int(b) for b in self.bounds)
        if len(bounds) < 1:
            raise ArgumentError("a grid needs at least one time dimension")
        if any(b < 0 for b in bounds):
            raise ArgumentError(f"grid bounds must be nonnegative, got {bounds}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def d(self) -> int:
        return len(self.bounds)

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of points along each dimension (bounds + 1)."""
        return tuple(b + 1 for b in self.bounds)

    @property
    def npoints(self) -> int:
        n = 1
        for b in self.bounds:
            n *= b + 1
        return n

    def covers(self, other: "Grid") -> bool:
        """True when this grid contains ``other`` componentwise."""
        return self.d == other.d and all(
            a >= b for a, b in zip(self.bounds, other.bounds)
        )

    def meet(self, other: "Grid") -> "Grid":
        """Componentwise-minimum grid (largest common subgrid)."""
        if self.d != other.d:
            raise DimensionMismatchError(
                f"grids have different dimension: {self.d} vs {other.d}"
            )
        return Grid(tuple(min(a, b) for a, b in zip(self.bounds, other.bounds)))


@dataclass(frozen=True)
class MatrixSeq:
    """Dense matrix sequence on a grid.

    ``values`` has shape ``grid.shape + (s, s)``; the matrix at multi-index
    ``k`` is ``values[k]``.  The array is frozen (read-only) on
    construction; a defensive copy is taken if the caller's array is
    writeable.  Real scalar sequences use ``s == 1``.
    """

    grid: Grid
    s: int
    values: np.ndarray

    def __post_init__(self):
        if self.s < 1:
            raise ArgumentError(f"state count must be >= 1, got {self.s}")
        vals = np.asarray(self.values)
        if vals.dtype.kind in "iub":
            vals = vals.astype(np.float64)
        elif vals.dtype.kind not in "fc":
            raise ArgumentError(f"unsupported value dtype {vals.dtype}")
        expected = self.grid.shape + (self.s, self.s)
        if vals.shape != expected:
            raise DimensionMismatchError(
                f"values shape {vals.shape} does not match grid/state shape {expected}"
            )
        if not np.isfinite(vals).all():
            raise ArgumentError("sequence values must be finite")
        if vals.flags.writeable:
            vals = vals.copy()
            vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def bounds(self) -> tuple[int, ...]:
        return self.grid.bounds

    @property
    def is_real(self) -> bool:
        return self.values.dtype.kind == "f"

    def at(self, k: Sequence[int]) -> np.ndarray:
        """Matrix at grid point ``k``."""
        return self.values[tuple(k)]

    def origin(self) -> np.ndarray:
        return self.values[(0,) * self.d]

    def entry(self, i: int, j: int) -> np.ndarray:
        """Scalar-sequence view of component (i, j), shape ``grid.shape``."""
        return self.values[..., i, j]


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


def zeros_seq(grid: Grid, s: int, dtype=np.float64) -> MatrixSeq:
    """All-zero sequence."""
    return MatrixSeq(grid, s, _frozen(np.zeros(grid.shape + (s, s), dtype=dtype)))


def make_identity(grid: Grid, s: int) -> MatrixSeq:
    """Identity of the convolution algebra: I_s at the origin, zero elsewhere."""
    vals = np.zeros(grid.shape + (s, s))
    vals[(0,) * grid.d] = np.eye(s)
    return MatrixSeq(grid, s, _frozen(vals))


def make_ones_diag(grid: Grid, s: int) -> MatrixSeq:
    """Diagonal all-ones sequence; convolving with it sums componentwise.

    Convolution with this sequence accumulates partial sums:
    ``(ones_diag * A)(k) = sum_{l <= k} A(l)``.
    """
    vals = np.zeros(grid.shape + (s, s))
    idx = np.arange(s)
    vals[..., idx, idx] = 1.0
    return MatrixSeq(grid, s, _frozen(vals))


def real_seq(grid: Grid, data) -> MatrixSeq:
    """Scalar sequence (s = 1) from an array shaped like the grid."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape != grid.shape:
        raise DimensionMismatchError(
            f"data shape {arr.shape} does not match grid shape {grid.shape}"
        )
    return MatrixSeq(grid, 1, _frozen(arr.reshape(grid.shape + (1, 1)).copy()))


def _check_same_layout(A: MatrixSeq, B: MatrixSeq) -> None:
    if A.s != B.s:
        raise DimensionMismatchError(f"state counts differ: {A.s} vs {B.s}")
    if A.grid != B.grid:
        raise DimensionMismatchError(
            f"grids differ: {A.grid.bounds} vs {B.grid.bounds}"
        )


def add(A: MatrixSeq, B: MatrixSeq) -> MatrixSeq:
    """Pointwise sum; operands must share grid and state count."""
    _check_same_layout(A, B)
    return MatrixSeq(A.grid, A.s, _frozen(A.values + B.values))


def sub(A: MatrixSeq, B: MatrixSeq) -> MatrixSeq:
    """Pointwise difference."""
    _check_same_layout(A, B)
    return MatrixSeq(A.grid, A.s, _frozen(A.values - B.values))


def scale(A: MatrixSeq, c: float) -> MatrixSeq:
    """Multiply every entry by the scalar ``c``."""
    return MatrixSeq(A.grid, A.s, _frozen(A.values * c))


def restrict(A: MatrixSeq, grid2: Grid) -> MatrixSeq:
    """Drop entries outside ``grid2``; requires ``grid2 <= A.grid``."""
    if not A.grid.covers(grid2):
        raise DimensionMismatchError(
            f"cannot restrict grid {A.grid.bounds} to larger grid {grid2.bounds}"
        )
    if grid2 == A.grid:
        return A
    sl = tuple(slice(0, b + 1) for b in grid2.bounds)
    return MatrixSeq(grid2, A.s, A.values[sl])


def embed(A: MatrixSeq, grid2: Grid) -> MatrixSeq:
    """Zero-pad onto the larger grid ``grid2 >= A.grid``."""
    if not grid2.covers(A.grid):
        raise DimensionMismatchError(
            f"cannot embed grid {A.grid.bounds} into smaller grid {grid2.bounds}"
        )
    if grid2 == A.grid:
        return A
    vals = np.zeros(grid2.shape + (A.s, A.s), dtype=A.values.dtype)
    sl = tuple(slice(0, b + 1) for b in A.grid.bounds)
    vals[sl] = A.values
    return MatrixSeq(grid2, A.s, _frozen(vals))


def cumulative(A: MatrixSeq) -> MatrixSeq:
    """Partial sums ``sum_{l <= k} A(l)``, i.e. convolution with the
    diagonal all-ones sequence, computed by nested cumulative sums."""
    vals = A.values
    for axis in range(A.d):
        vals = np.cumsum(vals, axis=axis)
    return MatrixSeq(A.grid, A.s, _frozen(vals))


def total_degrees(grid: Grid) -> np.ndarray:
    """Array of k_1 + ... + k_d over the grid, shape ``grid.shape``."""
    out = np.zeros(grid.shape, dtype=np.int64)
    for axis, n in enumerate(grid.shape):
        shape = [1] * grid.d
        shape[axis] = n
        out = out + np.arange(n, dtype=np.int64).reshape(shape)
    return out


# ---------------------------------------------------------------------------
# JSON serialization: {"d", "s", "bounds", "data"} with data the flat
# row-major list of s*s-flattened matrices.  Shared by every module and the
# CLI.
# ---------------------------------------------------------------------------


def seq_to_dict(A: MatrixSeq) -> dict:
    if not A.is_real:
        raise ArgumentError("only real sequences can be serialized")
    return {
        "d": A.d,
        "s": A.s,
        "bounds": list(A.bounds),
        "data": A.values.ravel(order="C").tolist(),
    }


def seq_from_dict(obj: dict) -> MatrixSeq:
    for field in ("d", "s", "bounds", "data"):
        if field not in obj:
            raise DimensionMismatchError(f"sequence JSON is missing field '{field}'")
    d = int(obj["d"])
    s = int(obj["s"])
    bounds = tuple(int(b) for b in obj["bounds"])
    if len(bounds) != d:
        raise DimensionMismatchError(
            f"field 'bounds' has {len(bounds)} entries but field 'd' is {d}"
        )
    grid = Grid(bounds)
    data = np.asarray(obj["data"], dtype=np.float64)
    expected = grid.npoints * s * s
    if data.size != expected:
        raise DimensionMismatchError(
            f"field 'data' has {data.size} entries, expected {expected}"
        )
    return MatrixSeq(grid, s, data.reshape(grid.shape + (s, s)))


def save_seq(path, A: MatrixSeq) -> None:
    with open(path, "w") as fh:
        json.dump(seq_to_dict(A), fh)


def load_seq(path) -> MatrixSeq:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DimensionMismatchError(f"cannot parse sequence file: {exc}") from exc
    if not isinstance(obj, dict):
        raise DimensionMismatchError("sequence file must hold a JSON object")
    return seq_from_dict(obj)
