"""Convolutional inversion of matrix sequences.

A sequence is invertible iff its origin matrix ``A(0)`` is nonsingular;
the inverse values on a grid depend only on the input values on that
grid, so truncated inverses are exact there.  Four routes are provided:

* ``inverse_series``     -- truncated power-series representation,
* ``inverse_recurrence`` -- the classical pointwise recurrence,
* ``inverse_newton``     -- degree-doubling Newton iteration,
* ``inverse_gauss_jordan`` -- row reduction over the ring of scalar
  sequences, returning an elementary-operation factorization.

Internal convolutions of the Newton and Gauss-Jordan routes go through
the FFT path, which is what gives them their near-linear cost in the
grid size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convolution import _fft_conv_values, _padded_lengths, convolve
from .errors import ArgumentError, DimensionMismatchError, NotInvertibleError
from .seqcore import (
    Grid,
    MatrixSeq,
    _frozen,
    make_identity,
    real_seq,
    restrict,
    seq_from_dict,
    seq_to_dict,
    sub,
    total_degrees,
)

__all__ = [
    "ElementaryOp",
    "GaussFactorization",
    "apply_elementary",
    "elementary_seq",
    "inverse",
    "inverse_series",
    "inverse_recurrence",
    "inverse_newton",
    "inverse_gauss_jordan",
]

# Relative determinant floor below which the origin matrix counts as
# singular: |det A(0)| < SINGULAR_RTOL * ||A(0)||_F ** s.
SINGULAR_RTOL = 1e-12


def _origin_inverse(A: MatrixSeq) -> np.ndarray:
    """Inverse of A(0), or NotInvertibleError when it is singular."""
    a0 = np.asarray(A.origin(), dtype=np.float64)
    det = float(np.linalg.det(a0))
    fro = float(np.linalg.norm(a0))
    if det == 0.0 or abs(det) < SINGULAR_RTOL * fro**A.s:
        raise NotInvertibleError(
            "sequence is not convolutionally invertible: origin matrix is "
            f"singular (|det| = {abs(det):.3e})"
        )
    return np.linalg.inv(a0)


def inverse(A: MatrixSeq, method: str = "gauss-jordan") -> MatrixSeq:
    """Convolutional inverse by the named method.

    ``method`` is one of ``"series"``, ``"recurrence"``, ``"newton"``, or
    ``"gauss-jordan"`` (the default, fastest configuration).
    """
    if method == "series":
        return inverse_series(A)
    if method == "recurrence":
        return inverse_recurrence(A)
    if method == "newton":
        return inverse_newton(A)
    if method == "gauss-jordan":
        return inverse_gauss_jordan(A)[0]
    raise ArgumentError(f"unknown inversion method {method!r}")


def inverse_series(A: MatrixSeq) -> MatrixSeq:
    """Inverse via the truncated geometric series.

    With ``C = identity - A(k) A(0)^{-1}`` the inverse at ``k`` is
    ``A(0)^{-1} sum_n C^(n)(k)``; powers of C beyond the total degree of
    the grid corner vanish because ``C(0) = 0``, so the sum is finite.
    """
    inv0 = _origin_inverse(A)
    s, grid = A.s, A.grid
    c_vals = -np.matmul(A.values, inv0)
    c_vals[(0,) * A.d] += np.eye(s)
    C = MatrixSeq(grid, s, _frozen(c_vals))

    total = make_identity(grid, s)
    power = make_identity(grid, s)
    for _ in range(sum(grid.bounds)):
        power = convolve(power, C)
        if not power.values.any():
            break
        total = MatrixSeq(grid, s, _frozen(total.values + power.values))
    return MatrixSeq(grid, s, _frozen(np.matmul(inv0, total.values)))


def inverse_recurrence(A: MatrixSeq) -> MatrixSeq:
    """Inverse by the classical pointwise recurrence in lexicographic
    order: each value is recovered from all previously computed ones.

    This is the quadratic-cost reference method; the sum over lower grid
    points is evaluated literally.
    """
    inv0 = _origin_inverse(A)
    a = A.values
    s = A.s
    out = np.zeros_like(a, dtype=np.float64)
    origin = (0,) * A.d
    out[origin] = inv0
    for k in np.ndindex(*A.grid.shape):
        if k == origin:
            continue
        acc = np.zeros((s, s))
        for l in np.ndindex(*tuple(ki + 1 for ki in k)):
            if l == k:
                continue
            acc += out[l] @ a[tuple(ki - li for ki, li in zip(k, l))]
        out[k] = -acc @ inv0
    return MatrixSeq(A.grid, s, _frozen(out))


def _masked(vals: np.ndarray, degrees: np.ndarray, limit: int) -> np.ndarray:
    keep = degrees < limit
    return vals * keep[(...,) + (None,) * (vals.ndim - degrees.ndim)]


def inverse_newton(A: MatrixSeq, steps: Optional[int] = None) -> MatrixSeq:
    """Inverse by Newton iteration with degree doubling.

    Starting from ``B = A(0)^{-1}`` at the origin, each step replaces B by
    ``B + B * (identity - A * B)`` truncated to total degree below
    ``2^(N+1)``, which doubles the validated degree range.  Iteration
    stops once the range covers the grid corner's total degree; ``steps``
    caps the iteration count instead when given (the result is then only
    valid below total degree ``2^steps``).
    """
    inv0 = _origin_inverse(A)
    grid, s = A.grid, A.s
    degrees = total_degrees(grid)
    maxdeg = sum(grid.bounds)
    lengths = _padded_lengths(grid)

    b = np.zeros(grid.shape + (s, s))
    b[(0,) * A.d] = inv0
    eye = make_identity(grid, s).values

    limit = 1
    n_done = 0
    while (limit <= maxdeg) if steps is None else (n_done < steps):
        limit *= 2
        ab = _fft_conv_values(A.values, b, grid.shape, lengths)
        resid = eye - ab
        corr = _fft_conv_values(b, resid, grid.shape, lengths)
        b = _masked(b + corr, degrees, limit)
        n_done += 1
    return MatrixSeq(grid, s, _frozen(b))


# ---------------------------------------------------------------------------
# Elementary row operations and Gauss-Jordan elimination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElementaryOp:
    """One elementary row operation on a matrix sequence.

    Rows are numbered 1..s.  ``swap`` exchanges rows i and j; ``scale``
    convolves row i with the invertible scalar sequence ``alpha``;
    ``row_add`` adds row i convolved with ``alpha`` to row j.
    """

    kind: str
    i: int
    j: Optional[int] = None
    alpha: Optional[MatrixSeq] = None

    def __post_init__(self):
        if self.kind not in ("swap", "scale", "row_add"):
            raise ArgumentError(f"unknown elementary operation {self.kind!r}")
        if self.i < 1:
            raise ArgumentError(f"row index must be >= 1, got {self.i}")
        if self.kind == "swap":
            if self.j is None or self.j < 1 or self.j == self.i:
                raise ArgumentError("swap needs a distinct second row index")
            if self.alpha is not None:
                raise ArgumentError("swap takes no scalar sequence")
        elif self.kind == "scale":
            if self.j is not None:
                raise ArgumentError("scale takes a single row index")
            self._check_alpha()
            if self.alpha.origin()[0, 0] == 0.0:
                raise ArgumentError(
                    "scaling sequence must be convolutionally invertible "
                    "(nonzero at the origin)"
                )
        else:
            if self.j is None or self.j < 1 or self.j == self.i:
                raise ArgumentError("row_add needs a distinct destination row")
            self._check_alpha()

    def _check_alpha(self):
        if self.alpha is None or self.alpha.s != 1:
            raise ArgumentError(f"{self.kind} needs a scalar sequence parameter")


def apply_elementary(op: ElementaryOp, A: MatrixSeq) -> MatrixSeq:
    """Apply a row operation; equivalent to convolving the matching
    elementary sequence with ``A`` from the left."""
    i = op.i - 1
    j = None if op.j is None else op.j - 1
    for idx in (op.i, op.j):
        if idx is not None and not (1 <= idx <= A.s):
            raise ArgumentError(f"row index {idx} outside 1..{A.s}")
    if op.kind == "swap":
        vals = A.values.copy()
        vals[..., [i, j], :] = vals[..., [j, i], :]
        return MatrixSeq(A.grid, A.s, _frozen(vals))

    target = A.grid.meet(op.alpha.grid)
    a = restrict(A, target).values.copy()
    alpha = restrict(op.alpha, target).values[..., 0, 0]
    lengths = _padded_lengths(target)
    if op.kind == "scale":
        for col in range(A.s):
            a[..., i, col] = _fft_conv_values(
                alpha, a[..., i, col].copy(), target.shape, lengths
            )
    else:
        for col in range(A.s):
            a[..., j, col] += _fft_conv_values(
                alpha, a[..., i, col].copy(), target.shape, lengths
            )
    return MatrixSeq(target, A.s, _frozen(a))


def elementary_seq(op: ElementaryOp, grid: Grid, s: int) -> MatrixSeq:
    """The elementary matrix sequence: the operation applied to the
    identity sequence."""
    return apply_elementary(op, make_identity(grid, s))


@dataclass(frozen=True)
class GaussFactorization:
    """Ordered elementary operations reducing a sequence to the identity.

    Applying ``ops`` left-to-right to the original sequence yields the
    identity; replaying them on the identity yields the inverse.
    """

    ops: tuple[ElementaryOp, ...]

    def apply(self, A: MatrixSeq) -> MatrixSeq:
        for op in self.ops:
            A = apply_elementary(op, A)
        return A

    def to_json_list(self) -> list:
        out = []
        for op in self.ops:
            rec = {"kind": op.kind, "i": op.i}
            if op.j is not None:
                rec["j"] = op.j
            if op.alpha is not None:
                rec["alpha"] = seq_to_dict(op.alpha)
            out.append(rec)
        return out

    @classmethod
    def from_json_list(cls, data: list) -> "GaussFactorization":
        ops = []
        for rec in data:
            alpha = seq_from_dict(rec["alpha"]) if "alpha" in rec else None
            ops.append(
                ElementaryOp(rec["kind"], int(rec["i"]), rec.get("j"), alpha)
            )
        return cls(tuple(ops))


def inverse_gauss_jordan(A: MatrixSeq) -> tuple[MatrixSeq, GaussFactorization]:
    """Inverse by convolution-based row reduction.

    Forward elimination with partial pivoting on the origin matrix
    followed by back substitution; pivot sequences are inverted with the
    Newton route.  Returns the inverse together with the elementary-
    operation factorization that reduces the input to the identity.
    """
    _origin_inverse(A)  # uniform singularity rejection
    grid, s = A.grid, A.s
    shape = grid.shape
    lengths = _padded_lengths(grid)
    guard = SINGULAR_RTOL * max(float(np.linalg.norm(A.origin())), 1e-300)

    def conv(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return _fft_conv_values(x, y, shape, lengths)

    w = A.values.astype(np.float64).copy()
    inv = make_identity(grid, s).values.copy()
    ident = np.zeros(shape)
    ident[(0,) * grid.d] = 1.0
    ops: list[ElementaryOp] = []

    def row_update(mat: np.ndarray, dst: int, src: int, alpha: np.ndarray) -> None:
        for col in range(s):
            entry = mat[..., src, col]
            if entry.any():
                mat[..., dst, col] += conv(alpha, entry)

    origin = (0,) * grid.d
    for col in range(s):
        w0 = w[origin]
        piv = col + int(np.argmax(np.abs(w0[col:, col])))
        if abs(w0[piv, col]) <= guard:
            raise NotInvertibleError(
                f"no usable pivot in column {col + 1}: origin matrix is singular"
            )
        if piv != col:
            ops.append(ElementaryOp("swap", col + 1, piv + 1))
            w[..., [col, piv], :] = w[..., [piv, col], :]
            inv[..., [col, piv], :] = inv[..., [piv, col], :]

        pinv = inverse_newton(real_seq(grid, w[..., col, col])).entry(0, 0)
        ops.append(ElementaryOp("scale", col + 1, alpha=real_seq(grid, pinv)))
        for c2 in range(s):
            entry = w[..., col, c2]
            if c2 == col:
                w[..., col, c2] = ident
            elif entry.any():
                w[..., col, c2] = conv(pinv, entry)
        for c2 in range(s):
            entry = inv[..., col, c2]
            if entry.any():
                inv[..., col, c2] = conv(pinv, entry)

        for row in range(col + 1, s):
            alpha = -w[..., row, col]
            if not alpha.any():
                continue
            ops.append(
                ElementaryOp("row_add", col + 1, row + 1, real_seq(grid, alpha))
            )
            row_update(w, row, col, alpha)
            w[..., row, col] = 0.0
            row_update(inv, row, col, alpha)

    for col in range(s - 1, 0, -1):
        for row in range(col - 1, -1, -1):
            alpha = -w[..., row, col]
            if not alpha.any():
                continue
            ops.append(
                ElementaryOp("row_add", col + 1, row + 1, real_seq(grid, alpha))
            )
            w[..., row, col] = 0.0
            row_update(inv, row, col, alpha)

    result = MatrixSeq(grid, s, _frozen(inv))
    return result, GaussFactorization(tuple(ops))
