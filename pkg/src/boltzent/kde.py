"""Kernel density estimates, their entropy and bandwidth derivatives of it.

One-dimensional integrals for the compact kernels are exact: the estimate is
piecewise polynomial between kernel edges and each piece is integrated in
closed form (see ``_kde1d``).  The Gaussian kernel uses a trapezoid rule with
step at most ``h/10`` and at least 4096 nodes.  For ``d > 1`` the product
kernel with a shared bandwidth is integrated on a dense grid of cubic cells
of side ``h/3`` whose node budget is capped.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _kde1d, _kde3d
from .distributions import Sample
from .errors import InvalidArgumentError, ResourceBudgetError

DEFAULT_NODE_BUDGET = 2**27
GAUSS_PAD = 8.0  # integration domain padding, in bandwidths
GAUSS_REACH = 9.0  # neighbour cut-off for Gaussian density sums
MIN_NODES_1D = 4096


@dataclass(frozen=True)
class Kernel:
    id: str
    support_radius: float
    code: int = field(repr=False)

    def __call__(self, u):
        return kernel_eval(self, u)


EPANECHNIKOV = Kernel("epanechnikov", 1.0, 0)
UNIFORM = Kernel("uniform", 1.0, 1)
GAUSSIAN = Kernel("gaussian", math.inf, 2)
KERNELS = {k.id: k for k in (EPANECHNIKOV, UNIFORM, GAUSSIAN)}


def get_kernel(kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown kernel {kernel!r}; valid kernels: {', '.join(KERNELS)}"
        ) from None


def kernel_eval(k, u):
    k = get_kernel(k)
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    if k.code == 0:
        out = np.where(inside, 0.75 * (1.0 - u * u), 0.0)
    elif k.code == 1:
        out = np.where(inside, 0.5, 0.0)
    else:
        out = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return out[()] if out.ndim == 0 else out


def kernel_derivative(k, u):
    """``K'(u)``, the almost-everywhere derivative for the compact kernels."""
    k = get_kernel(k)
    u = np.asarray(u, dtype=float)
    if k.code == 0:
        out = np.where(np.abs(u) < 1.0, -1.5 * u, 0.0)
    elif k.code == 1:
        out = np.zeros_like(u)
    else:
        out = -u * kernel_eval(k, u)
    return out[()] if out.ndim == 0 else out


def kernel_reach(k: Kernel) -> float:
    """Distance in bandwidths beyond which points are ignored."""
    return k.support_radius if math.isfinite(k.support_radius) else GAUSS_REACH


def _kernel_limits(k: Kernel):
    r = k.support_radius
    return (-r, r) if math.isfinite(r) else (-np.inf, np.inf)


def kernel_mass(k) -> float:
    k = get_kernel(k)
    return integrate.quad(lambda u: float(kernel_eval(k, u)), *_kernel_limits(k), epsabs=1e-14)[0]


def kernel_roughness(k) -> float:
    """``R(K) = int K^2``."""
    k = get_kernel(k)
    return integrate.quad(lambda u: float(kernel_eval(k, u)) ** 2, *_kernel_limits(k), epsabs=1e-14)[0]


def kernel_second_moment(k) -> float:
    """``int u^2 K(u) du``."""
    k = get_kernel(k)
    return integrate.quad(lambda u: u * u * float(kernel_eval(k, u)), *_kernel_limits(k), epsabs=1e-14)[0]


@dataclass(frozen=True, eq=False)
class KdeEstimate:
    """Kernel estimate ``(1/(N h^d)) sum_i prod_j K((x_j - x_ij)/h)``."""

    kernel: Kernel
    bandwidth: float
    points: np.ndarray
    dim: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def sorted_1d(self) -> np.ndarray:
        if "sorted" not in self._cache:
            self._cache["sorted"] = np.sort(self.points[:, 0])
        return self._cache["sorted"]

    def cells(self):
        if "cells" not in self._cache:
            cell = kernel_reach(self.kernel) * self.bandwidth
            order, ukeys, starts, corner, span = _kde3d.build_cells(self.points, cell)
            offsets = np.array(list(itertools.product((-1, 0, 1), repeat=self.dim)), dtype=np.int64)
            self._cache["cells"] = (order, ukeys, starts, corner, span, cell, offsets)
        return self._cache["cells"]


def make_kde(sample, bandwidth: float, kernel="epanechnikov", presorted: bool = False) -> KdeEstimate:
    """Build an estimate from a :class:`Sample` or an ``N x d`` array.

    ``presorted`` declares that 1D data are already ascending, which saves a
    sort when the same sample is evaluated at many bandwidths.
    """
    if not (bandwidth > 0) or not math.isfinite(bandwidth):
        raise InvalidArgumentError(f"bandwidth must be positive and finite, got {bandwidth}")
    data = sample.data if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0:
        raise InvalidArgumentError("sample must be a nonempty N x d array")
    if data.shape[1] > 3:
        raise InvalidArgumentError(f"dimension {data.shape[1]} > 3 is not supported")
    data = np.ascontiguousarray(data, dtype=float)
    est = KdeEstimate(get_kernel(kernel), float(bandwidth), data, data.shape[1])
    if presorted and est.dim == 1:
        est._cache["sorted"] = data[:, 0]
    return est


def _queries(est: KdeEstimate, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or (est.dim > 1 and x.ndim == 1)
    q = x.reshape(-1, est.dim)
    return np.ascontiguousarray(q), scalar


def kde_density(est: KdeEstimate, x, leave_one_out: bool = False):
    """Density at query point(s) ``x`` using only neighbouring points.

    With ``leave_one_out`` the queries must be the sample points themselves;
    each query then drops its own kernel and renormalises by ``N - 1``.
    """
    q, scalar = _queries(est, x)
    if leave_one_out and est.n < 2:
        raise InvalidArgumentError("leave-one-out needs at least two points")
    reach = kernel_reach(est.kernel)
    if est.dim == 1:
        out = _kde1d.window_density(est.sorted_1d(), est.bandwidth, q[:, 0], est.kernel.code, reach, leave_one_out)
    else:
        order, ukeys, starts, corner, span, cell, offsets = est.cells()
        out = _kde3d.cell_density(est.points, order, ukeys, starts, corner, span, cell, offsets,
                                  est.bandwidth, est.kernel.code, reach, q, leave_one_out)
    return float(out[0]) if scalar else out


def kde_density_bruteforce(est: KdeEstimate, x):
    """Direct sum over all points; reference for :func:`kde_density`."""
    q, scalar = _queries(est, x)
    out = _kde3d.brute_density(est.points, est.bandwidth, est.kernel.code, q)
    return float(out[0]) if scalar else out


@functools.lru_cache(maxsize=4)
def _log_table(n: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.arange(n + 1, dtype=float))


def _gauss_grid_1d(est: KdeEstimate):
    xs = est.sorted_1d()
    h = est.bandwidth
    lo = xs[0] - GAUSS_PAD * h
    hi = xs[-1] + GAUSS_PAD * h
    m = max(MIN_NODES_1D, int(math.ceil((hi - lo) / (h / 10.0))) + 1)
    step = (hi - lo) / (m - 1)
    f, d1, d2 = _kde1d.gaussian_grid(xs, h, lo, step, m, GAUSS_REACH)
    w = np.full(m, step)
    w[0] = w[-1] = 0.5 * step
    return f, d1, d2, w


def _xlogx(f):
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = f[pos] * np.log(f[pos])
    return out


def _log_or_zero(f):
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = np.log(f[pos])
    return out


def _grid_layout(points: np.ndarray, h: float, kernel: Kernel):
    pad = kernel_reach(kernel) if kernel.code != 2 else GAUSS_PAD
    step = h / 3.0
    lo = points.min(axis=0) - pad * h
    hi = points.max(axis=0) + pad * h
    dims = np.ones(3, dtype=np.int64)
    dims[: points.shape[1]] = np.ceil((hi - lo) / step).astype(np.int64) + 2
    return lo, step, dims, pad


def grid_nodes_needed(points: np.ndarray, h: float, kernel="epanechnikov") -> int:
    """Node count the d > 1 quadrature uses at bandwidth ``h``."""
    _, _, dims, _ = _grid_layout(np.atleast_2d(points), h, get_kernel(kernel))
    return int(np.prod(dims.astype(float)))


def kde_mass(est: KdeEstimate, node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """Integral of the estimate by the same rule :func:`kde_entropy` uses."""
    return _quadrature(est, node_budget)[1]


def _quadrature(est: KdeEstimate, node_budget: int):
    h = est.bandwidth
    if est.dim == 1:
        code = est.kernel.code
        if code == 0:
            out = _kde1d.epanechnikov_pass(est.sorted_1d(), h, False, _log_table(est.n))
            return out[_kde1d.ENTROPY], out[_kde1d.MASS]
        if code == 1:
            ent, _, _, mass, _ = _kde1d.uniform_pass(est.sorted_1d(), h)
            return ent, mass
        f, _, _, w = _gauss_grid_1d(est)
        return -float(np.dot(w, _xlogx(f))), float(np.dot(w, f))
    lo, step, dims, pad = _grid_layout(est.points, h, est.kernel)
    needed = int(np.prod(dims.astype(float)))
    if needed > node_budget:
        raise ResourceBudgetError(needed, node_budget)
    return _kde3d.grid_entropy(est.points, h, est.kernel.code, pad, lo, step, dims)


def kde_entropy(est: KdeEstimate, method: str = "quadrature", leave_one_out: bool = False,
                node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """Plug-in entropy ``-int F ln F`` of the estimate, in nats.

    ``method="quadrature"`` integrates over the whole support;
    ``method="resubstitution"`` averages ``-ln F(x_i)`` over the sample, with
    the point's own kernel included unless ``leave_one_out`` is set.
    """
    if method == "quadrature":
        return float(_quadrature(est, node_budget)[0])
    if method == "resubstitution":
        dens = kde_density(est, est.points if est.dim > 1 else est.points[:, 0], leave_one_out)
        dens = np.atleast_1d(dens)
        if np.any(dens <= 0):
            return math.inf
        return float(-math.fsum(np.log(dens)) / dens.size)
    raise InvalidArgumentError(f"unknown entropy method {method!r}; use 'quadrature' or 'resubstitution'")


def _require_1d(est: KdeEstimate):
    if est.dim != 1:
        raise InvalidArgumentError("bandwidth derivatives are implemented for d = 1 only")


def _derivative_terms(est: KdeEstimate) -> dict:
    """All bandwidth-derivative integrals at once, cached on the estimate."""
    if "derivs" in est._cache:
        return est._cache["derivs"]
    _require_1d(est)
    h = est.bandwidth
    code = est.kernel.code
    if code == 0:
        o = _kde1d.epanechnikov_pass(est.sorted_1d(), h, True, _log_table(est.n))
        split = o[_kde1d.SECOND_LOG] + o[_kde1d.SQUARE_OVER_F]
        # same quantity through F * d2(ln F): the kernel-edge point masses of
        # d2F/dh2 integrate to 3/h^2 and cancel the a.e. part exactly
        log_form = split - (o[_kde1d.SECOND_MASS] + 3.0 / (h * h))
        terms = dict(entropy=o[_kde1d.ENTROPY], deriv=o[_kde1d.DERIV], deriv_mass=o[_kde1d.DERIV_MASS],
                     split=split, log_form=log_form)
    elif code == 1:
        ent, d1, d2, _, dmass = _kde1d.uniform_pass(est.sorted_1d(), h)
        terms = dict(entropy=ent, deriv=d1, deriv_mass=dmass, split=-d2, log_form=-d2)
    else:
        f, d1, d2, w = _gauss_grid_1d(est)
        lf = _log_or_zero(f)
        pos = f > 0
        sq = np.zeros_like(f)
        sq[pos] = d1[pos] ** 2 / f[pos]
        second_log = float(np.dot(w, d2 * lf))
        split = second_log + float(np.dot(w, sq))
        d2lnf = np.zeros_like(f)
        d2lnf[pos] = d2[pos] / f[pos] - (d1[pos] / f[pos]) ** 2
        log_form = second_log - float(np.dot(w, f * d2lnf))
        terms = dict(entropy=-float(np.dot(w, _xlogx(f))), deriv=-float(np.dot(w, d1 * lf)),
                     deriv_mass=float(np.dot(w, d1)), split=split, log_form=log_form)
    est._cache["derivs"] = terms
    return terms


def kde_entropy_derivative(est: KdeEstimate) -> float:
    """``dS/dh = -int (dF/dh) ln F dv`` (d = 1)."""
    return float(_derivative_terms(est)["deriv"])


def kde_derivative_mass(est: KdeEstimate) -> float:
    """``int dF/dh dv``; zero up to rounding because the mass is fixed."""
    return float(_derivative_terms(est)["deriv_mass"])


def kde_second_derivative_residual(est: KdeEstimate, form: str = "split") -> float:
    """Residual equal to ``-d2S/dh2`` (d = 1).

    ``form="split"`` evaluates ``int F'' ln F + int F'^2 / F``;
    ``form="log"`` evaluates ``int F'' ln F - int F (ln F)''``, primes being
    bandwidth derivatives.  For the box kernel the entropy derivative jumps
    wherever two kernel edges cross, and the value returned is the second
    derivative between such crossings.
    """
    if form not in ("split", "log"):
        raise InvalidArgumentError(f"unknown residual form {form!r}; use 'split' or 'log'")
    terms = _derivative_terms(est)
    return float(terms["split"] if form == "split" else terms["log_form"])
