"""Semi-Markov kernels and quantities defined directly on them.

A kernel ``q`` collects the joint transition/sojourn probabilities
``q[i, j](k) = P(next state j, sojourn increment k | current state i)``.
Validation enforces the three kernel conditions: (i) nonnegativity,
(ii) unit row mass up to a declared truncation tail, and (iii) no mass
at the origin (instantaneous transitions are forbidden, except for
marginal and transformed kernels which may allow them).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import ArgumentError, DimensionMismatchError, KernelValidationError
from .seqcore import (
    Grid,
    MatrixSeq,
    _frozen,
    cumulative,
    seq_from_dict,
    seq_to_dict,
)

__all__ = [
    "SemiMarkovKernel",
    "ParametricKernelSpec",
    "validate_kernel",
    "build_bpoisson_kernel",
    "bivariate_poisson_pmf",
    "cumulated_kernel",
    "survival_kernel",
    "SojournDistributions",
    "sojourn_distributions",
    "embedded_chain",
    "marginal_kernel",
    "phi_kernel",
    "coordinate_projection",
    "coordinate_product",
    "total_time",
    "kernel_to_dict",
    "kernel_from_dict",
    "save_kernel",
    "load_kernel",
]

# Numerical slack above exact unit row mass (condition (ii) upper side).
ROW_MASS_SLACK = 1e-12


@dataclass(frozen=True)
class SemiMarkovKernel:
    """A validated kernel: the truncated sequence plus coverage metadata.

    ``row_mass[i]`` is the total probability captured on the grid for
    state i; ``tail_tol`` is the declared bound on ``1 - min(row_mass)``.
    ``allow_instantaneous`` marks marginal/transformed kernels for which
    mass at the origin is legitimate.
    """

    seq: MatrixSeq
    row_mass: np.ndarray
    tail_tol: float
    allow_instantaneous: bool = False

    def __post_init__(self):
        mass = np.asarray(self.row_mass, dtype=np.float64)
        if mass.shape != (self.seq.s,):
            raise DimensionMismatchError("row_mass must have one entry per state")
        object.__setattr__(self, "row_mass", _frozen(mass.copy()))

    @property
    def s(self) -> int:
        return self.seq.s

    @property
    def d(self) -> int:
        return self.seq.d

    @property
    def grid(self) -> Grid:
        return self.seq.grid


def validate_kernel(
    seq: MatrixSeq, tail_tol: float, allow_instantaneous: bool = False
) -> SemiMarkovKernel:
    """Check the kernel conditions and wrap the sequence.

    Raises
    ------
    KernelValidationError
        Naming the violated condition and the offending state.
    """
    vals = seq.values
    if (vals < 0).any():
        flat = int(np.argmin(vals))
        idx = np.unravel_index(flat, vals.shape)
        state = int(idx[-2])
        raise KernelValidationError(
            f"condition (i) violated: q[{state},{int(idx[-1])}]"
            f"{tuple(int(v) for v in idx[:-2])} = {vals[idx]:.3e} < 0",
            condition="i",
            state=state,
        )
    if not allow_instantaneous:
        origin = seq.origin()
        if origin.any():
            i, j = np.unravel_index(int(np.argmax(np.abs(origin))), origin.shape)
            raise KernelValidationError(
                f"condition (iii) violated: q[{int(i)},{int(j)}] has mass "
                f"{origin[i, j]:.3e} at the origin",
                condition="iii",
                state=int(i),
            )
    grid_axes = tuple(range(seq.d))
    mass = vals.sum(axis=grid_axes + (seq.d + 1,))
    bad = (mass < 1.0 - tail_tol) | (mass > 1.0 + ROW_MASS_SLACK)
    if bad.any():
        state = int(np.argmax(bad))
        raise KernelValidationError(
            f"condition (ii) violated: row {state} captures mass "
            f"{mass[state]:.12f}, outside [1 - {tail_tol:g}, 1 + {ROW_MASS_SLACK:g}]",
            condition="ii",
            state=state,
        )
    return SemiMarkovKernel(seq, mass, tail_tol, allow_instantaneous)


@dataclass(frozen=True)
class ParametricKernelSpec:
    """Embedded transition matrix plus a named sojourn-time family.

    The shipped family is the shifted bivariate Poisson: sojourn times
    depend only on the current state i and follow a bivariate Poisson
    with parameters (alpha_i, beta_i, gamma_i) shifted by (1, 1).
    """

    P: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    family: str = "shifted_bivariate_poisson"

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatchError("P must be a square matrix")
        if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-10):
            raise ArgumentError("P must be row-stochastic")
        s = P.shape[0]
        a = np.asarray(self.alpha, dtype=np.float64)
        b = np.asarray(self.beta, dtype=np.float64)
        g = np.asarray(self.gamma, dtype=np.float64)
        for name, arr in (("alpha", a), ("beta", b), ("gamma", g)):
            if arr.shape != (s,):
                raise DimensionMismatchError(f"{name} must have one entry per state")
        if (a <= 0).any() or (b <= 0).any() or (g < 0).any():
            raise ArgumentError("need alpha > 0, beta > 0, gamma >= 0")
        if self.family != "shifted_bivariate_poisson":
            raise ArgumentError(f"unknown kernel family {self.family!r}")
        for name, arr in (("P", P), ("alpha", a), ("beta", b), ("gamma", g)):
            object.__setattr__(self, name, _frozen(arr.copy()))

    @property
    def s(self) -> int:
        return self.P.shape[0]


def bivariate_poisson_pmf(
    alpha: float, beta: float, gamma: float, n1: int, n2: int
) -> np.ndarray:
    """Bivariate Poisson probabilities on ``[0, n1) x [0, n2)``.

    The Poisson prefactors are accumulated in log space; the inner
    correlation sum is evaluated by a running term ratio, which keeps
    the evaluation stable for moderate parameters without special
    functions beyond ``gammaln``.
    """
    x1 = np.arange(n1, dtype=np.float64)[:, None]
    x2 = np.arange(n2, dtype=np.float64)[None, :]
    logpref = (
        -(alpha + beta + gamma)
        + x1 * np.log(alpha)
        - gammaln(x1 + 1.0)
        + x2 * np.log(beta)
        - gammaln(x2 + 1.0)
    )
    inner = np.ones((n1, n2))
    term = np.ones((n1, n2))
    for k in range(1, min(n1, n2)):
        term = term * ((x1 - (k - 1)) * (x2 - (k - 1)) * gamma) / (k * alpha * beta)
        term = np.where((x1 >= k) & (x2 >= k), term, 0.0)
        inner += term
    return np.exp(logpref) * inner


def build_bpoisson_kernel(
    spec: ParametricKernelSpec, grid: Grid, tail_tol: float = 1e-6
) -> SemiMarkovKernel:
    """Materialize the shifted-bivariate-Poisson kernel on a 2-d grid.

    ``q[i, j](k1, k2) = P[i, j] * f_i(k1 - 1, k2 - 1)`` with zero mass on
    the axes (the shift forbids zero sojourn in either coordinate).
    """
    if grid.d != 2:
        raise ArgumentError(
            f"this sojourn family needs two time dimensions, grid has {grid.d}"
        )
    n1, n2 = grid.shape
    s = spec.s
    vals = np.zeros(grid.shape + (s, s))
    for i in range(s):
        f = bivariate_poisson_pmf(
            spec.alpha[i], spec.beta[i], spec.gamma[i], n1 - 1, n2 - 1
        )
        vals[1:, 1:, i, :] = f[:, :, None] * spec.P[i][None, None, :]
    return validate_kernel(MatrixSeq(grid, s, _frozen(vals)), tail_tol)


def cumulated_kernel(kernel: SemiMarkovKernel) -> MatrixSeq:
    """Componentwise cumulative sums ``Q(k) = sum_{l <= k} q(l)``."""
    return cumulative(kernel.seq)


def _survival_from_density(vals: np.ndarray, d: int) -> np.ndarray:
    """P(every coordinate of the increment exceeds k), by inclusion-
    exclusion over the coordinatewise "<= k" events on cumulative sums.

    ``vals`` has shape (*grid, ...trailing); the survival array shares it.
    """
    grid_shape = vals.shape[:d]
    trailing = vals.shape[d:]
    total = vals.sum(axis=tuple(range(d)))
    out = np.broadcast_to(total, grid_shape + trailing).astype(np.float64).copy()
    for r in range(1, d + 1):
        sign = -1.0 if r % 2 == 1 else 1.0
        for subset in itertools.combinations(range(d), r):
            marg = vals.sum(axis=tuple(ax for ax in range(d) if ax not in subset))
            for pos in range(len(subset)):
                marg = np.cumsum(marg, axis=pos)
            shape = tuple(
                grid_shape[ax] if ax in subset else 1 for ax in range(d)
            ) + trailing
            out += sign * marg.reshape(shape)
    return out


def survival_kernel(kernel: SemiMarkovKernel) -> MatrixSeq:
    """Joint survival ``P(increment > k in every coordinate, next = j)``.

    Evaluated from the truncated kernel by inclusion-exclusion over the
    coordinatewise cumulative sums, since direct tail summation is not
    available on a truncated grid.  For d = 1 this reduces to the plain
    complement of the cumulated kernel.
    """
    vals = _survival_from_density(kernel.seq.values, kernel.d)
    return MatrixSeq(kernel.grid, kernel.s, _frozen(vals))


@dataclass(frozen=True)
class SojournDistributions:
    """Per-state sojourn-time laws derived from a kernel.

    ``h`` and ``H`` are the joint pmf and cdf, shape (*grid, s);
    ``H_bar`` is the all-coordinates-exceed survival function of the
    same shape; ``H_tilde`` is the diagonal matrix sequence of
    complementary cdfs ``1 - H_i``, ready for convolution.
    """

    h: np.ndarray
    H: np.ndarray
    H_bar: np.ndarray
    H_tilde: MatrixSeq


def sojourn_distributions(kernel: SemiMarkovKernel) -> SojournDistributions:
    d, s = kernel.d, kernel.s
    h = kernel.seq.values.sum(axis=d + 1)
    H = h
    for axis in range(d):
        H = np.cumsum(H, axis=axis)
    H_bar = _survival_from_density(h, d)
    tilde = np.zeros(kernel.grid.shape + (s, s))
    idx = np.arange(s)
    tilde[..., idx, idx] = 1.0 - H
    return SojournDistributions(
        _frozen(h.copy()), _frozen(H.copy()), _frozen(H_bar),
        MatrixSeq(kernel.grid, s, _frozen(tilde)),
    )


def embedded_chain(kernel: SemiMarkovKernel) -> np.ndarray:
    """Transition matrix of the state chain: total kernel mass per pair,
    renormalized by the captured row mass so rows sum to one."""
    pair_mass = kernel.seq.values.sum(axis=tuple(range(kernel.d)))
    return pair_mass / pair_mass.sum(axis=1, keepdims=True)


def marginal_kernel(kernel: SemiMarkovKernel, u: int) -> SemiMarkovKernel:
    """One-dimensional kernel of the u-th time component (u is 1-based).

    Mass is summed over all other coordinates; the result may carry mass
    at the origin, so validation skips the instantaneous-transition
    condition.
    """
    if not 1 <= u <= kernel.d:
        raise ArgumentError(f"dimension index {u} outside 1..{kernel.d}")
    axes = tuple(ax for ax in range(kernel.d) if ax != u - 1)
    vals = kernel.seq.values.sum(axis=axes)
    seq = MatrixSeq(Grid((kernel.grid.bounds[u - 1],)), kernel.s, _frozen(vals))
    return validate_kernel(seq, kernel.tail_tol, allow_instantaneous=True)


def coordinate_projection(u: int) -> Callable[[tuple], int]:
    """Map a grid point to its u-th coordinate (u is 1-based)."""
    return lambda k: k[u - 1]


def coordinate_product(u: int, v: int) -> Callable[[tuple], int]:
    """Map a grid point to the product of coordinates u and v (1-based)."""
    return lambda k: k[u - 1] * k[v - 1]


def total_time() -> Callable[[tuple], int]:
    """Map a grid point to the sum of its coordinates."""
    return lambda k: sum(k)


def phi_kernel(
    kernel: SemiMarkovKernel, phi: Callable[[tuple], int]
) -> SemiMarkovKernel:
    """Kernel of the transformed chain whose increments are ``phi`` of the
    original increments; mass at each value m collects all grid points
    with ``phi = m``."""
    values = {}
    top = 0
    for k in np.ndindex(*kernel.grid.shape):
        m = phi(k)
        if not isinstance(m, (int, np.integer)) or m < 0:
            raise ArgumentError(
                f"phi must map grid points to nonnegative integers, got {m!r}"
            )
        m = int(m)
        top = max(top, m)
        block = values.get(m)
        if block is None:
            values[m] = kernel.seq.values[k].copy()
        else:
            block += kernel.seq.values[k]
    out = np.zeros((top + 1, kernel.s, kernel.s))
    for m, block in values.items():
        out[m] = block
    seq = MatrixSeq(Grid((top,)), kernel.s, _frozen(out))
    return validate_kernel(seq, kernel.tail_tol, allow_instantaneous=True)


# ---------------------------------------------------------------------------
# Kernel files: the sequence JSON plus {"tail_tol"} for dense kernels, or a
# {"parametric": {...}} block (dense data wins when both are present).
# ---------------------------------------------------------------------------


def kernel_to_dict(kernel: SemiMarkovKernel) -> dict:
    obj = seq_to_dict(kernel.seq)
    obj["tail_tol"] = kernel.tail_tol
    return obj


def _spec_from_dict(obj: dict) -> ParametricKernelSpec:
    for field in ("family", "P", "alpha", "beta", "gamma"):
        if field not in obj:
            raise DimensionMismatchError(
                f"parametric kernel JSON is missing field '{field}'"
            )
    return ParametricKernelSpec(
        P=np.asarray(obj["P"], dtype=np.float64),
        alpha=np.asarray(obj["alpha"], dtype=np.float64),
        beta=np.asarray(obj["beta"], dtype=np.float64),
        gamma=np.asarray(obj["gamma"], dtype=np.float64),
        family=obj["family"],
    )


def kernel_from_dict(obj: dict, grid: Grid | None = None) -> SemiMarkovKernel:
    tail_tol = float(obj.get("tail_tol", 1e-6))
    if "data" in obj:
        return validate_kernel(seq_from_dict(obj), tail_tol)
    if "parametric" in obj:
        spec = _spec_from_dict(obj["parametric"])
        if grid is None:
            if "bounds" not in obj:
                raise DimensionMismatchError(
                    "parametric kernel needs field 'bounds' or an explicit grid"
                )
            grid = Grid(tuple(int(b) for b in obj["bounds"]))
        return build_bpoisson_kernel(spec, grid, tail_tol)
    raise DimensionMismatchError(
        "kernel JSON needs either field 'data' or field 'parametric'"
    )


def save_kernel(path, kernel: SemiMarkovKernel) -> None:
    with open(path, "w") as fh:
        json.dump(kernel_to_dict(kernel), fh)


def load_kernel(path, grid: Grid | None = None) -> SemiMarkovKernel:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DimensionMismatchError(f"cannot parse kernel file: {exc}") from exc
    if not isinstance(obj, dict):
        raise DimensionMismatchError("kernel file must hold a JSON object")
    return kernel_from_dict(obj, grid)
