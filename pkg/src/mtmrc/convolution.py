"""Convolution product of matrix sequences.

``(A * B)(k) = sum_{l + l' = k} A(l) B(l')`` with the matrix product taken
in that order.  Truncated inputs determine the product only on the
componentwise-minimum grid, so that is the result grid of every method
here.  Two evaluation paths are provided: direct summation of the defining
formula, and circular convolution on zero-padded grids via the FFT.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

from .errors import ArgumentError, DimensionMismatchError, NumericalError
from .seqcore import Grid, MatrixSeq, _frozen, make_identity, restrict

__all__ = [
    "convolve",
    "convolve_direct",
    "convolve_fft",
    "nfold",
    "dft",
    "idft",
    "FFT_DISPATCH_POINTS",
    "IMAG_TOLERANCE",
]

# Auto dispatch: use the FFT path when the zero-padded grid holds more
# points than this, otherwise evaluate directly.
FFT_DISPATCH_POINTS = 4096

# Largest imaginary residue tolerated after the inverse transform; larger
# values indicate an implementation bug rather than roundoff.
IMAG_TOLERANCE = 1e-9


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _common_grid(A: MatrixSeq, B: MatrixSeq) -> Grid:
    if A.s != B.s:
        raise DimensionMismatchError(f"state counts differ: {A.s} vs {B.s}")
    return A.grid.meet(B.grid)


def _padded_lengths(target: Grid) -> tuple[int, ...]:
    # Linear convolution of two sequences truncated to the target grid
    # needs >= 2*(b+1) - 1 points per dimension; round up to a power of 2.
    return tuple(_next_pow2(2 * (b + 1) - 1) for b in target.bounds)


def convolve_direct(A: MatrixSeq, B: MatrixSeq) -> MatrixSeq:
    """Convolution by direct evaluation of the defining sum.

    Cost grows with the square of the point count per dimension; use
    :func:`convolve_fft` for large grids.
    """
    target = _common_grid(A, B)
    a = restrict(A, target).values
    b = restrict(B, target).values
    s = A.s
    out = np.empty(target.shape + (s, s), dtype=np.result_type(a, b))
    for k in np.ndindex(*target.shape):
        fwd = tuple(slice(0, ki + 1) for ki in k)
        rev = tuple(slice(ki, None, -1) for ki in k)
        out[k] = np.einsum("nij,njk->ik", a[fwd].reshape(-1, s, s),
                           b[rev].reshape(-1, s, s))
    return MatrixSeq(target, s, _frozen(out))


def _fft_conv_values(a: np.ndarray, b: np.ndarray, out_shape: tuple[int, ...],
                     lengths: tuple[int, ...]) -> np.ndarray:
    """Linear convolution of value arrays via padded circular convolution.

    Arrays are either scalar fields shaped like the grid or matrix fields
    with trailing (s, s) axes; returns the block ``out_shape`` of the
    result."""
    axes = tuple(range(len(out_shape)))
    fa = _fft.fftn(a, s=lengths, axes=axes)
    fb = _fft.fftn(b, s=lengths, axes=axes)
    fc = fa * fb if a.ndim == len(out_shape) else np.matmul(fa, fb)
    c = _fft.ifftn(fc, axes=axes)
    region = c[tuple(slice(0, n) for n in out_shape)]
    worst = float(np.abs(region.imag).max()) if region.size else 0.0
    if worst > IMAG_TOLERANCE:
        raise NumericalError(
            f"imaginary residue {worst:.3e} after inverse transform exceeds "
            f"{IMAG_TOLERANCE:.0e}"
        )
    return np.ascontiguousarray(region.real)


def convolve_fft(A: MatrixSeq, B: MatrixSeq) -> MatrixSeq:
    """Convolution by zero-padding, entrywise DFT, pointwise matrix
    products of the transforms, and inverse DFT.

    Padding each dimension past the combined length makes the circular
    convolution coincide with the linear one on the kept region; the
    result equals :func:`convolve_direct` up to roundoff.
    """
    target = _common_grid(A, B)
    a = restrict(A, target).values
    b = restrict(B, target).values
    vals = _fft_conv_values(a, b, target.shape, _padded_lengths(target))
    return MatrixSeq(target, A.s, _frozen(vals))


def convolve(A: MatrixSeq, B: MatrixSeq, method: str = "auto") -> MatrixSeq:
    """Convolution product with method dispatch.

    ``method`` is one of ``"direct"``, ``"fft"``, or ``"auto"``; auto
    picks the FFT path once the padded grid exceeds
    ``FFT_DISPATCH_POINTS`` points.
    """
    if method == "direct":
        return convolve_direct(A, B)
    if method == "fft":
        return convolve_fft(A, B)
    if method != "auto":
        raise ArgumentError(f"unknown convolution method {method!r}")
    target = _common_grid(A, B)
    padded = 1
    for n in _padded_lengths(target):
        padded *= n
    if padded > FFT_DISPATCH_POINTS:
        return convolve_fft(A, B)
    return convolve_direct(A, B)


def nfold(A: MatrixSeq, n: int, method: str = "auto") -> MatrixSeq:
    """n-fold convolution power ``A^(n)`` with ``A^(0)`` the identity.

    Computed by binary exponentiation on the fixed grid of ``A``; each
    squaring is exact there because convolution on the common grid needs
    no tail terms.
    """
    if n < 0:
        raise ArgumentError(f"convolution power must be nonnegative, got {n}")
    result = make_identity(A.grid, A.s)
    base = A
    while n:
        if n & 1:
            result = convolve(result, base, method)
        n >>= 1
        if n:
            base = convolve(base, base, method)
    return result


def dft(A: MatrixSeq, padded_bounds=None) -> MatrixSeq:
    """Entrywise multidimensional DFT on a zero-padded grid.

    Returns a complex sequence on the padded grid; ``padded_bounds``
    defaults to the input grid and must cover it.
    """
    if padded_bounds is None:
        padded = A.grid
    else:
        padded = Grid(tuple(padded_bounds))
        if not padded.covers(A.grid):
            raise DimensionMismatchError(
                f"padded bounds {padded.bounds} must cover grid {A.grid.bounds}"
            )
    axes = tuple(range(A.d))
    out = _fft.fftn(A.values, s=padded.shape, axes=axes)
    return MatrixSeq(padded, A.s, _frozen(out))


def idft(Ahat: MatrixSeq) -> MatrixSeq:
    """Inverse of :func:`dft` on the same grid (complex result)."""
    axes = tuple(range(Ahat.d))
    out = _fft.ifftn(Ahat.values, axes=axes)
    return MatrixSeq(Ahat.grid, Ahat.s, _frozen(out))
