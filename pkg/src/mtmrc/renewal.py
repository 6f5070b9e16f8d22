"""Renewal-equation quantities and ergodic moment formulas.

Everything here is driven by the renewal-density sequence
``u = (identity - q)^(-1) = sum_n q^(n)``, whose values on the grid are
exact because the inverse at a point depends only on kernel values below
it.  On top of u sit the renewal function, the state-occupation
transition function, first-hitting laws, kernel recovery, and the
moment tables for recurrence and first-passage times.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .convolution import convolve
from .errors import (
    ArgumentError,
    DimensionMismatchError,
    IrreducibilityError,
    NumericalError,
)
from .inversion import inverse, inverse_newton
from .kernel import (
    SemiMarkovKernel,
    ParametricKernelSpec,
    SojournDistributions,
    coordinate_product,
    embedded_chain,
    phi_kernel,
    sojourn_distributions,
)
from .seqcore import (
    Grid,
    MatrixSeq,
    _frozen,
    cumulative,
    make_identity,
    real_seq,
    seq_to_dict,
    sub,
    add,
)

__all__ = [
    "MreProblem",
    "SojournMoments",
    "RecurrenceMoments",
    "MrcAnalysis",
    "renewal_u",
    "solve_mre",
    "markov_renewal_function",
    "smc_transition",
    "first_hitting",
    "recover_kernel",
    "sojourn_moments",
    "sojourn_moments_closed_form",
    "product_moment_survival",
    "pair_sojourn_moments",
    "stationary_distribution",
    "first_passage_means",
    "recurrence_cross_moments",
    "analyze",
]


def _identity_minus(kernel: SemiMarkovKernel) -> MatrixSeq:
    vals = -kernel.seq.values.copy()
    vals[(0,) * kernel.d] += np.eye(kernel.s)
    return MatrixSeq(kernel.grid, kernel.s, _frozen(vals))


def renewal_u(kernel: SemiMarkovKernel, method: str = "gauss-jordan") -> MatrixSeq:
    """Renewal-density sequence ``u = (identity - q)^(-1)``.

    Invertibility is automatic: the kernel carries no mass at the origin,
    so the origin matrix of ``identity - q`` is the identity.
    """
    return inverse(_identity_minus(kernel), method)


@dataclass(frozen=True)
class MreProblem:
    """A Markov renewal equation ``L = G_known + q * L``."""

    G_known: MatrixSeq
    q: SemiMarkovKernel

    def __post_init__(self):
        if self.G_known.s != self.q.s or self.G_known.grid != self.q.grid:
            raise DimensionMismatchError(
                "right-hand side and kernel must share grid and state count"
            )


def solve_mre(problem: MreProblem, u: Optional[MatrixSeq] = None) -> MatrixSeq:
    """Unique solution ``L = u * G_known`` of the renewal equation."""
    if u is None:
        u = renewal_u(problem.q)
    return convolve(u, problem.G_known)


def markov_renewal_function(
    kernel: SemiMarkovKernel, u: Optional[MatrixSeq] = None
) -> MatrixSeq:
    """Expected state-visit counts ``U[i, j](k)``, counting the visit at
    step 0; the componentwise cumulative of u."""
    if u is None:
        u = renewal_u(kernel)
    return cumulative(u)


def smc_transition(
    kernel: SemiMarkovKernel,
    u: Optional[MatrixSeq] = None,
    soj: Optional[SojournDistributions] = None,
) -> MatrixSeq:
    """Transition function ``P[i, j](k)`` of the state process observed at
    multi-time k: u convolved with the diagonal of complementary sojourn
    cdfs."""
    if u is None:
        u = renewal_u(kernel)
    if soj is None:
        soj = sojourn_distributions(kernel)
    return convolve(u, soj.H_tilde)


def _diag_inverse(u: MatrixSeq) -> MatrixSeq:
    vals = np.zeros(u.grid.shape + (u.s, u.s))
    for j in range(u.s):
        inv = inverse_newton(real_seq(u.grid, u.entry(j, j)))
        vals[..., j, j] = inv.entry(0, 0)
    return MatrixSeq(u.grid, u.s, _frozen(vals))


def first_hitting(
    kernel: SemiMarkovKernel, u: Optional[MatrixSeq] = None
) -> tuple[MatrixSeq, MatrixSeq]:
    """First-hitting-time pmf g and cdf G between states.

    ``g = (u - identity) * dg(u)^(-1)`` with each diagonal entry of u
    inverted as a scalar sequence; the diagonal entries are the
    recurrence-time laws.
    """
    if u is None:
        u = renewal_u(kernel)
    g = convolve(sub(u, make_identity(u.grid, u.s)), _diag_inverse(u))
    return g, cumulative(g)


def recover_kernel(
    g: MatrixSeq, u: MatrixSeq, method: str = "gauss-jordan"
) -> MatrixSeq:
    """Reconstruct the kernel from the first-hitting pmf and u:
    ``q = identity - (identity + g * dg(u))^(-1)``."""
    if g.grid != u.grid or g.s != u.s:
        raise DimensionMismatchError("g and u must share grid and state count")
    dg_vals = np.zeros(u.grid.shape + (u.s, u.s))
    for j in range(u.s):
        dg_vals[..., j, j] = u.entry(j, j)
    dg_u = MatrixSeq(u.grid, u.s, _frozen(dg_vals))
    ident = make_identity(u.grid, u.s)
    inner = add(ident, convolve(g, dg_u))
    return sub(ident, inverse(inner, method))


# ---------------------------------------------------------------------------
# Sojourn moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SojournMoments:
    """Per-state sojourn moment tables.

    Dimension axes are indexed 0..d-1 for time dimensions 1..d:
    ``m1[u, i]`` mean of coordinate u+1 in state i, ``m2`` second
    moments, ``mprod[u, v, i]`` product means, ``cov`` covariances,
    ``m1_pair[u, i, j]`` and ``mprod_pair[u, v, i, j]`` the versions
    conditioned on the next state.
    """

    m1: np.ndarray
    m2: np.ndarray
    mprod: np.ndarray
    cov: np.ndarray
    m1_pair: np.ndarray
    mprod_pair: np.ndarray


def _coordinate_weights(grid: Grid) -> list[np.ndarray]:
    out = []
    for axis, n in enumerate(grid.shape):
        shape = [1] * grid.d
        shape[axis] = n
        out.append(np.arange(n, dtype=np.float64).reshape(shape))
    return out


def sojourn_moments(kernel: SemiMarkovKernel) -> SojournMoments:
    """Moment tables by weighted summation over the grid.

    Sums are normalized by the captured mass, so the tables are the exact
    moments of the truncation-conditioned laws; the distortion relative
    to the untruncated kernel is bounded by the declared tail.
    """
    d, s = kernel.d, kernel.s
    grid_axes = tuple(range(d))
    q = kernel.seq.values
    h = q.sum(axis=d + 1)
    mass = h.sum(axis=grid_axes)
    pair_mass = q.sum(axis=grid_axes)
    safe_pair = np.where(pair_mass > 0, pair_mass, 1.0)
    coords = _coordinate_weights(kernel.grid)

    m1 = np.empty((d, s))
    m1_pair = np.empty((d, s, s))
    mprod = np.empty((d, d, s))
    mprod_pair = np.empty((d, d, s, s))
    for u in range(d):
        m1[u] = (h * coords[u][..., None]).sum(axis=grid_axes) / mass
        m1_pair[u] = (q * coords[u][..., None, None]).sum(axis=grid_axes) / safe_pair
        for v in range(d):
            w = coords[u] * coords[v]
            mprod[u, v] = (h * w[..., None]).sum(axis=grid_axes) / mass
            mprod_pair[u, v] = (
                q * w[..., None, None]
            ).sum(axis=grid_axes) / safe_pair
    m2 = np.einsum("uui->ui", mprod).copy()
    cov = mprod - m1[:, None, :] * m1[None, :, :]
    return SojournMoments(
        _frozen(m1), _frozen(m2), _frozen(mprod), _frozen(cov),
        _frozen(m1_pair), _frozen(mprod_pair),
    )


def sojourn_moments_closed_form(spec: ParametricKernelSpec) -> SojournMoments:
    """Exact moment tables for the shifted-bivariate-Poisson family.

    The shifted marginals are ``1 + Poisson(alpha + gamma)`` and
    ``1 + Poisson(beta + gamma)``; the covariance equals gamma and the
    product mean is ``gamma + m1 * m2``.
    """
    lam = np.stack([spec.alpha + spec.gamma, spec.beta + spec.gamma])
    m1 = lam + 1.0
    m2 = lam + lam**2 + 2.0 * lam + 1.0
    s = spec.s
    mprod = np.empty((2, 2, s))
    mprod[0, 0] = m2[0]
    mprod[1, 1] = m2[1]
    mprod[0, 1] = mprod[1, 0] = spec.gamma + m1[0] * m1[1]
    cov = mprod - m1[:, None, :] * m1[None, :, :]
    m1_pair = np.repeat(m1[:, :, None], s, axis=2)
    mprod_pair = np.repeat(mprod[:, :, :, None], s, axis=3)
    return SojournMoments(
        _frozen(m1), _frozen(m2.copy()), _frozen(mprod), _frozen(cov),
        _frozen(m1_pair), _frozen(mprod_pair),
    )


def product_moment_survival(kernel: SemiMarkovKernel, u: int, v: int) -> np.ndarray:
    """Product means via the transformed kernel of increment products.

    Builds the kernel of ``Y = X_u * X_v`` (u, v 1-based) and sums its
    survival function, the independent route to the same numbers as
    ``sojourn_moments().mprod``.
    """
    yk = phi_kernel(kernel, coordinate_product(u, v))
    hy = yk.seq.values.sum(axis=2)
    cdf = np.cumsum(hy, axis=0)
    surv = 1.0 - cdf / cdf[-1]
    return surv.sum(axis=0)


def pair_sojourn_moments(kernel: SemiMarkovKernel) -> tuple[np.ndarray, np.ndarray]:
    """Pair-conditioned mean and product-mean tables (m1_pair, mprod_pair)."""
    mom = sojourn_moments(kernel)
    return mom.m1_pair, mom.mprod_pair


# ---------------------------------------------------------------------------
# Ergodic moment formulas
# ---------------------------------------------------------------------------


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix.

    Solves the fixed-point system with the normalization row appended;
    reducibility (checked by strong connectivity of the positive-entry
    digraph) raises IrreducibilityError.
    """
    p = np.asarray(p, dtype=np.float64)
    s = p.shape[0]
    ncomp, _ = connected_components(
        csr_matrix(p > 0), directed=True, connection="strong"
    )
    if ncomp > 1:
        raise IrreducibilityError(
            f"embedded chain is reducible ({ncomp} strongly connected components)"
        )
    m = np.vstack([(p.T - np.eye(s))[:-1], np.ones(s)])
    rhs = np.zeros(s)
    rhs[-1] = 1.0
    nu = np.linalg.solve(m, rhs)
    worst = float(np.abs(nu @ p - nu).max())
    if (nu < -1e-12).any() or worst > 1e-10:
        raise NumericalError(
            f"stationary vector failed residual checks (residual {worst:.2e})"
        )
    return nu


def first_passage_means(
    kernel: SemiMarkovKernel,
    p: Optional[np.ndarray] = None,
    m1: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Mean first-passage times ``mu[u, i, j]`` per time dimension.

    For each target j the means solve the linear system obtained by
    conditioning on the first jump: ``mu_ij = m_i + sum_{r != j} p_ir
    mu_rj``; solved densely with partial pivoting.
    """
    if p is None:
        p = embedded_chain(kernel)
    if m1 is None:
        m1 = sojourn_moments(kernel).m1
    s = p.shape[0]
    d = m1.shape[0]
    stationary_distribution(p)  # irreducibility gate
    mu = np.empty((d, s, s))
    for j in range(s):
        pj = p.copy()
        pj[:, j] = 0.0
        try:
            x = np.linalg.solve(np.eye(s) - pj, m1.T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"first-passage system singular: {exc}") from exc
        mu[:, :, j] = x.T
    return mu


@dataclass(frozen=True)
class RecurrenceMoments:
    """Recurrence-time moment tables per state j.

    ``mu_cross[u, v, j]`` is the mean product of recurrence-time
    coordinates u+1 and v+1; variances, covariances and correlations
    derive from it and the first-passage means.
    """

    mu_cross: np.ndarray
    variances: np.ndarray
    gamma: np.ndarray
    correlations: np.ndarray


def recurrence_cross_moments(
    kernel: SemiMarkovKernel,
    p: Optional[np.ndarray] = None,
    nu: Optional[np.ndarray] = None,
    moments: Optional[SojournMoments] = None,
    mu: Optional[np.ndarray] = None,
) -> RecurrenceMoments:
    """Second-order recurrence moments for an irreducible, ergodic chain.

    Per target j:
    ``mu_cross[u, v, j] = (mbar[u, v] + sum_{i, r != j} nu_i p_ir
    (m_ir[u] mu_rj[v] + m_ir[v] mu_rj[u])) / nu_j`` with
    ``mbar = sum_i nu_i mprod[:, :, i]``; the u = v case is the second
    recurrence moment.
    """
    if p is None:
        p = embedded_chain(kernel)
    if nu is None:
        nu = stationary_distribution(p)
    if moments is None:
        moments = sojourn_moments(kernel)
    if mu is None:
        mu = first_passage_means(kernel, p, moments.m1)
    d, s = moments.m1.shape
    mbar = np.einsum("uvi,i->uv", moments.mprod, nu)
    mu_cross = np.empty((d, d, s))
    for j in range(s):
        w = nu[:, None] * p
        w[:, j] = 0.0
        t1 = np.einsum("ir,uir,vr->uv", w, moments.m1_pair, mu[:, :, j])
        mu_cross[:, :, j] = (mbar + t1 + t1.T) / nu[j]
    mu_diag = np.einsum("ujj->uj", mu[:, :, :]).copy()  # mu[u, j, j]
    variances = np.einsum("uuj->uj", mu_cross) - mu_diag**2
    gamma = mu_cross - mu_diag[:, None, :] * mu_diag[None, :, :]
    denom = np.sqrt(variances[:, None, :] * variances[None, :, :])
    correlations = gamma / denom
    return RecurrenceMoments(
        _frozen(mu_cross), _frozen(variances.copy()), _frozen(gamma),
        _frozen(correlations),
    )


# ---------------------------------------------------------------------------
# Full analysis bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MrcAnalysis:
    """All derived sequences and scalar tables for one kernel."""

    u: MatrixSeq
    U: MatrixSeq
    P: MatrixSeq
    g: MatrixSeq
    G: MatrixSeq
    p: np.ndarray
    moments: SojournMoments
    irreducible: bool
    nu: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    recurrence: Optional[RecurrenceMoments] = None

    def to_dict(self) -> dict:
        out = {
            "u": seq_to_dict(self.u),
            "U": seq_to_dict(self.U),
            "P": seq_to_dict(self.P),
            "g": seq_to_dict(self.g),
            "G": seq_to_dict(self.G),
            "p": self.p.tolist(),
            "irreducible": self.irreducible,
            "sojourn_moments": {
                "m1": self.moments.m1.tolist(),
                "m2": self.moments.m2.tolist(),
                "mprod": self.moments.mprod.tolist(),
                "cov": self.moments.cov.tolist(),
            },
        }
        if self.irreducible:
            out["nu"] = self.nu.tolist()
            out["first_passage_means"] = self.mu.tolist()
            out["recurrence"] = {
                "mu_cross": self.recurrence.mu_cross.tolist(),
                "variances": self.recurrence.variances.tolist(),
                "gamma": self.recurrence.gamma.tolist(),
                "correlations": self.recurrence.correlations.tolist(),
            }
        return out


def _check_analysis(u: MatrixSeq, P: MatrixSeq) -> None:
    origin = u.origin()
    if np.abs(origin - np.eye(u.s)).max() > 1e-12:
        raise NumericalError("renewal density does not start at the identity")
    if float(u.values.min()) < -1e-12:
        raise NumericalError(
            f"renewal density has a negative entry ({u.values.min():.3e})"
        )
    rows = P.values.sum(axis=-1)
    worst = float(np.abs(rows - 1.0).max())
    if worst > 1e-8:
        raise NumericalError(
            f"transition function rows deviate from 1 by {worst:.3e}"
        )


def analyze(kernel: SemiMarkovKernel, method: str = "gauss-jordan") -> MrcAnalysis:
    """Compute the full analysis bundle for a validated kernel.

    When the embedded chain is reducible the ergodic tables (nu, first
    passage, recurrence) are omitted and ``irreducible`` is False; the
    sequences and sojourn moments are still produced.
    """
    u = renewal_u(kernel, method)
    soj = sojourn_distributions(kernel)
    U = cumulative(u)
    P = smc_transition(kernel, u, soj)
    g, G = first_hitting(kernel, u)
    _check_analysis(u, P)
    p = embedded_chain(kernel)
    moments = sojourn_moments(kernel)
    try:
        nu = stationary_distribution(p)
    except IrreducibilityError:
        return MrcAnalysis(u, U, P, g, G, p, moments, irreducible=False)
    mu = first_passage_means(kernel, p, moments.m1)
    rec = recurrence_cross_moments(kernel, p, nu, moments, mu)
    return MrcAnalysis(
        u, U, P, g, G, p, moments, True, nu, _frozen(mu), rec
    )
