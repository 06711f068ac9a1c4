"""Entropy curves over smoothing parameters and the derivative-minimum selector.

A curve tabulates the replicate-mean entropy ``S(p)`` on a log-spaced grid of
bin widths or bandwidths ``p``, together with ``dS/d ln p``.  The selected
parameter is where that derivative is smallest.  Scott's bin width and the
AMISE bandwidth are provided as reference selectors.
"""

from __future__ import annotations

import functools
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distributions as dists
from .distributions import Sample
from .errors import BoundaryMinimumError, DataFormatError, InvalidArgumentError
from .histogram import histogram_entropy_nd, sorted_histogram_entropy_1d
from .kde import get_kernel, kde_entropy, kernel_roughness, kernel_second_moment, make_kde

CURVE_SCHEMA = "boltzent.curve/1"
DEFAULT_GRID_POINTS = 60
# coarsest histogram bin as a fraction of the data range (see default_grid)
HISTOGRAM_TOP_FRACTION = {1: 1.0 / 8.0}
HISTOGRAM_TOP_FRACTION_ND = 1.0 / 4.0
# node budget used to pick the finest default bandwidth for d > 1
GRID_NODE_TARGET = 2**24

BIN_WIDTH = "bin_width"
BANDWIDTH = "bandwidth"


@dataclass(frozen=True)
class SmoothingGrid:
    values: np.ndarray
    kind: str = BIN_WIDTH

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise InvalidArgumentError("a smoothing grid needs at least 3 values")
        if np.any(v <= 0) or np.any(np.diff(v) <= 0):
            raise InvalidArgumentError("grid values must be positive and strictly increasing")
        if self.kind not in (BIN_WIDTH, BANDWIDTH):
            raise InvalidArgumentError(f"grid kind must be {BIN_WIDTH!r} or {BANDWIDTH!r}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def is_log_uniform(self, tol: float = 1e-12) -> bool:
        r = self.values[1:] / self.values[:-1]
        return bool(np.all(np.abs(r / r[0] - 1.0) <= tol))

    @classmethod
    def geometric(cls, lo: float, hi: float, num: int = DEFAULT_GRID_POINTS, kind: str = BIN_WIDTH):
        if not (0 < lo < hi):
            raise InvalidArgumentError(f"need 0 < lo < hi, got {lo}, {hi}")
        return cls(np.geomspace(lo, hi, num), kind)


@dataclass(frozen=True)
class Estimator:
    """``kind`` is ``"histogram"`` or ``"kde"``; ``kernel`` applies to KDE only."""

    kind: str = "histogram"
    kernel: str = "epanechnikov"

    def __post_init__(self):
        if self.kind not in ("histogram", "kde"):
            raise InvalidArgumentError(f"estimator must be 'histogram' or 'kde', got {self.kind!r}")
        if self.kind == "kde":
            get_kernel(self.kernel)

    @property
    def grid_kind(self) -> str:
        return BIN_WIDTH if self.kind == "histogram" else BANDWIDTH

    @property
    def label(self) -> str:
        return "histogram" if self.kind == "histogram" else f"kde-{self.kernel}"

    @classmethod
    def parse(cls, text: str) -> "Estimator":
        """Accepts ``histogram``, ``kde`` or ``kde:<kernel>``."""
        kind, _, kernel = text.partition(":")
        return cls(kind, kernel or "epanechnikov")


@dataclass(frozen=True, eq=False)
class EntropyCurve:
    grid: SmoothingGrid
    mean_entropy: np.ndarray
    std_entropy: np.ndarray
    replicates: int
    derivative: np.ndarray
    # replicate x grid matrix; absent for curves read back from CSV
    per_replicate: np.ndarray | None = field(default=None, repr=False)

    @property
    def params(self) -> np.ndarray:
        return self.grid.values


@dataclass(frozen=True)
class SelectorResult:
    param_dm: float
    entropy_dm: float
    derivative_min: float
    index: int
    boundary_flag: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_record(self) -> dict:
        return {
            "param_dm": self.param_dm,
            "entropy_dm": self.entropy_dm,
            "derivative_min": self.derivative_min,
            "index": self.index,
            "boundary_flag": self.boundary_flag,
        }


# -- grids -------------------------------------------------------------------

def data_range(data: np.ndarray) -> float:
    """Largest per-dimension extent of an ``N x d`` array."""
    data = np.asarray(data, dtype=float).reshape(len(data), -1)
    return float(np.max(data.max(axis=0) - data.min(axis=0)))


def _finest_bandwidth_for_budget(data: np.ndarray, budget: int) -> float:
    ext = data.max(axis=0) - data.min(axis=0)

    def nodes(h):
        return float(np.prod(np.ceil((ext + 2 * h) / (h / 3.0)) + 2))

    lo, hi = 1e-12, float(ext.max())
    if nodes(hi) > budget:
        return hi
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if nodes(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-9:
            break
    return hi


def default_grid(data, estimator: Estimator | str = "histogram", num: int = DEFAULT_GRID_POINTS,
                 node_target: int = GRID_NODE_TARGET) -> SmoothingGrid:
    """Log-spaced grid from ``range / (4 N^(1/d))`` upward.

    Bandwidth grids end at the data range.  Histogram grids end at
    ``range / 8`` in 1D and ``range / 4`` otherwise: coarser histograms have
    so few cells that their entropy stops tracking the density and the
    derivative turns erratic.  For
    ``d > 1`` bandwidth grids start no finer than the quadrature node target
    allows.
    """
    est = Estimator.parse(estimator) if isinstance(estimator, str) else estimator
    data = data.data if isinstance(data, Sample) else np.asarray(data, dtype=float)
    data = data.reshape(len(data), -1)
    n, d = data.shape
    rng_ = data_range(data)
    if rng_ <= 0:
        raise InvalidArgumentError("data range is zero; cannot build a default grid")
    lo = rng_ / (4.0 * n ** (1.0 / d))
    if est.kind == "histogram":
        hi = rng_ * HISTOGRAM_TOP_FRACTION.get(d, HISTOGRAM_TOP_FRACTION_ND)
    else:
        hi = rng_
        if d > 1:
            lo = max(lo, _finest_bandwidth_for_budget(data, node_target))
    if lo >= hi:
        lo = hi / 16.0
    return SmoothingGrid.geometric(lo, hi, num, est.grid_kind)


# -- curves ------------------------------------------------------------------

def _spatial_order(data: np.ndarray) -> np.ndarray:
    # cache-friendly point order for the d > 1 grid scatter
    cell = max(data_range(data) / 32.0, 1e-300)
    key = np.floor((data - data.min(axis=0)) / cell).astype(np.int64)
    folded = key[:, 0]
    for j in range(1, data.shape[1]):
        folded = folded * 64 + key[:, j]
    return np.argsort(folded, kind="stable")


def replicate_entropies(data: np.ndarray, params: np.ndarray, estimator: Estimator,
                        entropy_method: str = "quadrature") -> np.ndarray:
    """Entropy of one sample at every grid parameter."""
    data = np.asarray(data, dtype=float).reshape(len(data), -1)
    out = np.empty(len(params))
    d = data.shape[1]
    if estimator.kind == "histogram":
        if d == 1:
            xs = np.sort(data[:, 0])
            for k, p in enumerate(params):
                out[k] = sorted_histogram_entropy_1d(xs, float(p))
        else:
            data = np.ascontiguousarray(data)
            for k, p in enumerate(params):
                out[k] = histogram_entropy_nd(data, float(p))
        return out
    if d == 1:
        pts = np.sort(data[:, 0])[:, None]
        presorted = True
    else:
        pts = np.ascontiguousarray(data[_spatial_order(data)])
        presorted = False
    for k, p in enumerate(params):
        est = make_kde(pts, float(p), estimator.kernel, presorted=presorted)
        out[k] = kde_entropy(est, entropy_method)
    return out


def _sample_task(args):
    dist_id, n, seed, params, estimator, method = args
    data = dists.sample(dist_id, n, seed).data
    return replicate_entropies(data, params, estimator, method)


def _data_task(args):
    data, params, estimator, method = args
    return replicate_entropies(data, params, estimator, method)


def _run_tasks(fn, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        # map preserves task order, so the join is deterministic
        return list(pool.map(fn, tasks))


def curve_from_matrix(grid: SmoothingGrid, matrix: np.ndarray) -> EntropyCurve:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    reps = matrix.shape[0]
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0, ddof=1) if reps > 1 else np.zeros(matrix.shape[1])
    return EntropyCurve(grid, mean, std, reps, derivative_curve(grid.values, mean), matrix)


def entropy_curve(samples, grid: SmoothingGrid, estimator: Estimator | str = "histogram",
                  entropy_method: str = "quadrature", threads: int = 1) -> EntropyCurve:
    """Mean and spread of the entropy over replicate samples at each grid value."""
    est = Estimator.parse(estimator) if isinstance(estimator, str) else estimator
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("entropy_curve needs at least one replicate")
    arrays = [s.data if isinstance(s, Sample) else np.asarray(s, dtype=float).reshape(len(s), -1)
              for s in samples]
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise InvalidArgumentError(f"replicates have inconsistent dimensions {sorted(dims)}")
    ids = {s.distribution_id for s in samples if isinstance(s, Sample)}
    if len(ids) > 1:
        raise InvalidArgumentError(f"replicates come from different distributions {sorted(ids)}")
    tasks = [(a, grid.values, est, entropy_method) for a in arrays]
    return curve_from_matrix(grid, np.vstack(_run_tasks(_data_task, tasks, threads)))


def entropy_curve_from_seeds(dist_id: str, n: int, seeds, grid: SmoothingGrid,
                             estimator: Estimator | str = "histogram",
                             entropy_method: str = "quadrature", threads: int = 1) -> EntropyCurve:
    """Like :func:`entropy_curve` but draws each replicate inside its worker."""
    est = Estimator.parse(estimator) if isinstance(estimator, str) else estimator
    dists.get_distribution(dist_id)
    tasks = [(dist_id, n, int(s), grid.values, est, entropy_method) for s in seeds]
    if not tasks:
        raise InvalidArgumentError("entropy_curve needs at least one replicate")
    return curve_from_matrix(grid, np.vstack(_run_tasks(_sample_task, tasks, threads)))


def derivative_curve(params, mean_entropy) -> np.ndarray:
    """``dS/d ln p`` by central differences, one-sided at both ends."""
    p = np.asarray(params, dtype=float)
    s = np.asarray(mean_entropy, dtype=float)
    if p.size < 3 or s.size != p.size:
        raise InvalidArgumentError("derivative_curve needs matching arrays of length >= 3")
    lp = np.log(p)
    out = np.empty_like(s)
    out[1:-1] = (s[2:] - s[:-2]) / (lp[2:] - lp[:-2])
    out[0] = (s[1] - s[0]) / (lp[1] - lp[0])
    out[-1] = (s[-1] - s[-2]) / (lp[-1] - lp[-2])
    return out


def _local_minima(deriv: np.ndarray) -> list[int]:
    k = np.arange(1, deriv.size - 1)
    mask = (deriv[k] < deriv[k - 1]) & (deriv[k] <= deriv[k + 1])
    return k[mask].tolist()


def find_derivative_minimum(curve: EntropyCurve, window: tuple[int, int] | None = None,
                            raise_on_boundary: bool = True, s_true: float | None = None) -> SelectorResult:
    """Grid point where ``dS/d ln p`` is smallest.

    ``window`` is an inclusive index range to search.  The smallest value
    over the window wins, ties going to the smaller parameter.  When it sits
    on the first or last searched index the grid is too narrow; this raises
    :class:`BoundaryMinimumError` unless ``raise_on_boundary`` is false, in
    which case the result carries ``boundary_flag=True``.  ``s_true`` is only
    used for a diagnostic: the parameter where the mean curve crosses it.
    """
    deriv = np.asarray(curve.derivative)
    size = deriv.size
    lo, hi = (0, size - 1) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= lo < hi < size) or hi - lo < 4:
        raise InvalidArgumentError(f"window {window} must hold at least 3 interior points of a {size}-point curve")
    j = lo + int(np.argmin(deriv[lo:hi + 1]))
    boundary = j in (lo, hi)
    diag = {"local_minima": _local_minima(deriv[lo:hi + 1])}
    diag["local_minima"] = [lo + k for k in diag["local_minima"]]
    diag["multiple_minima"] = len(diag["local_minima"]) > 1
    if s_true is not None:
        diag["cross_param"] = _cross_point(curve, s_true)
    res = SelectorResult(float(curve.params[j]), float(curve.mean_entropy[j]), float(deriv[j]), j, boundary, diag)
    if boundary and raise_on_boundary:
        raise BoundaryMinimumError("lower" if j == lo else "upper", res)
    return res


def _cross_point(curve: EntropyCurve, s_true: float) -> float | None:
    s = curve.mean_entropy - s_true
    idx = np.flatnonzero(np.sign(s[:-1]) != np.sign(s[1:]))
    if idx.size == 0:
        return None
    k = int(idx[0])
    lp = np.log(curve.params)
    t = s[k] / (s[k] - s[k + 1])
    return float(np.exp(lp[k] + t * (lp[k + 1] - lp[k])))


def per_replicate_minima(curve: EntropyCurve) -> list[SelectorResult]:
    """Selector applied to each replicate's own curve (variance studies)."""
    if curve.per_replicate is None:
        raise InvalidArgumentError("curve has no per-replicate entropies")
    out = []
    for row in curve.per_replicate:
        single = EntropyCurve(curve.grid, row, np.zeros_like(row), 1, derivative_curve(curve.params, row))
        out.append(find_derivative_minimum(single, raise_on_boundary=False))
    return out


# -- reference selectors -----------------------------------------------------

@functools.lru_cache(maxsize=None)
def _roughness(dist_id: str, order: int) -> float:
    d = dists.get_distribution(dist_id)
    return dists.roughness_fprime(d) if order == 1 else dists.roughness_fsecond(d)


def _dist_id(dist) -> str:
    return dist if isinstance(dist, str) else dist.id


def scott_bin_width(dist, n: int) -> float:
    """``(6 / R(f'))^(1/3) N^(-1/3)``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    return (6.0 / _roughness(_dist_id(dist), 1)) ** (1.0 / 3.0) * n ** (-1.0 / 3.0)


def amise_bandwidth(dist, kernel, n: int) -> float:
    """``[R(K) / (R(f'') mu2(K)^2)]^(1/5) N^(-1/5)``."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    k = get_kernel(kernel)
    rk = kernel_roughness(k)
    mu2 = kernel_second_moment(k)
    return (rk / (_roughness(_dist_id(dist), 2) * mu2 * mu2)) ** 0.2 * n ** (-0.2)


def fit_scaling_exponent(ns, params) -> tuple[float, float]:
    """Least-squares slope and intercept of ``ln p`` against ``ln N``."""
    ns = np.asarray(ns, dtype=float)
    ps = np.asarray(params, dtype=float)
    if ns.size < 3 or ns.size != ps.size:
        raise InvalidArgumentError("fit_scaling_exponent needs at least 3 matching points")
    if np.any(ns <= 0) or np.any(ps <= 0):
        raise InvalidArgumentError("sizes and parameters must be positive")
    x = np.log(ns)
    y = np.log(ps)
    A = np.column_stack((x, np.ones_like(x)))
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(icpt)


# -- CSV ---------------------------------------------------------------------

CURVE_COLUMNS = ("param", "mean_entropy", "std_entropy", "derivative")


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def curve_to_csv(curve: EntropyCurve, meta: dict | None = None) -> str:
    head = {"schema": CURVE_SCHEMA, "kind": curve.grid.kind, "replicates": curve.replicates}
    head.update(meta or {})
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
    buf.write(",".join(CURVE_COLUMNS) + "\n")
    for row in zip(curve.params, curve.mean_entropy, curve.std_entropy, curve.derivative):
        buf.write(",".join(fmt17(v) for v in row) + "\n")
    return buf.getvalue()


def write_curve(curve: EntropyCurve, path, meta: dict | None = None) -> None:
    Path(path).write_text(curve_to_csv(curve, meta))


def parse_curve(text: str, source: str = "<curve>") -> EntropyCurve:
    """Read a curve CSV.  The derivative column is taken as stored."""
    kind = BIN_WIDTH
    reps = 1
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            for tok in s[1:].split():
                key, _, val = tok.partition("=")
                if key == "kind":
                    kind = val
                elif key == "replicates" and val.isdigit():
                    reps = int(val)
            continue
        if not header_seen:
            cols = tuple(c.strip() for c in s.split(","))
            if cols != CURVE_COLUMNS:
                raise DataFormatError(f"{source}:{lineno}: expected header {','.join(CURVE_COLUMNS)}")
            header_seen = True
            continue
        parts = s.split(",")
        try:
            if len(parts) != 4:
                raise ValueError
            rows.append([float(v) for v in parts])
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: expected 4 numeric fields, got {s!r}") from None
    if not header_seen:
        raise DataFormatError(f"{source}: missing header line")
    if len(rows) < 3:
        raise DataFormatError(f"{source}: a curve needs at least 3 rows, found {len(rows)}")
    arr = np.array(rows)
    try:
        grid = SmoothingGrid(arr[:, 0], kind)
    except InvalidArgumentError as err:
        raise DataFormatError(f"{source}: {err}") from None
    return EntropyCurve(grid, arr[:, 1], arr[:, 2], reps, arr[:, 3])


def read_curve(path) -> EntropyCurve:
    return parse_curve(Path(path).read_text(), str(path))
