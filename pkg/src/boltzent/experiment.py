"""Replicated selector experiments driven by a flat run configuration.

For every sample size the run draws ``replicates`` samples (seed
``base_seed + r`` for replicate ``r``), tabulates the entropy curve, applies
the derivative-minimum selector to the replicate-mean curve and also
evaluates the entropy at the reference parameter (Scott's bin width for
histograms, the AMISE bandwidth for kernels).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import distributions as dists
from .errors import BoundaryMinimumError, DataFormatError, InvalidArgumentError
from .selector import (
    EntropyCurve,
    Estimator,
    SmoothingGrid,
    _run_tasks,
    amise_bandwidth,
    curve_from_matrix,
    default_grid,
    find_derivative_minimum,
    fit_scaling_exponent,
    fmt17,
    per_replicate_minima,
    replicate_entropies,
    scott_bin_width,
    write_curve,
)

REPORT_SCHEMA = "boltzent.report/1"

# Published reference rows, keyed by distribution then N:
# (selected parameter, mean entropy at it, its standard deviation).
REFERENCE_HISTOGRAM_ROWS = {
    "normal1d": {10**3: (2.174e-1, 1.411, 2.099e-2), 10**4: (1.190e-1, 1.418, 6.643e-3),
                 10**5: (5.051e-2, 1.419, 2.115e-3), 10**6: (2.119e-2, 1.419, 8.134e-4),
                 10**7: (1.190e-2, 1.419, 2.045e-4), 10**8: (5.020e-3, 1.419, 8.081e-5)},
    "powerlaw1d": {10**3: (6.250e-2, 0.2756, 9.919e-3), 10**4: (2.419e-2, 0.2790, 3.121e-3),
                   10**5: (8.721e-3, 0.2797, 4.941e-4), 10**6: (3.178e-3, 0.2812, 2.464e-5),
                   10**7: (1.786e-3, 0.2805, 1.326e-5), 10**8: (1.004e-3, 0.2804, 6.098e-7)},
    "normal3d": {10**3: (1.170e-1, 4.226, 4.003e-2), 10**4: (6.511e-2, 4.254, 1.083e-2),
                 10**5: (3.669e-2, 4.256, 3.697e-3), 10**6: (1.546e-2, 4.256, 1.295e-3),
                 10**7: (8.695e-3, 4.257, 4.184e-4), 10**8: (1.151e-3, 4.257, 1.049e-4)},
}
REFERENCE_KDE_ROWS = {
    "normal1d": {10**3: (1.846e-1, 1.410, 2.128e-2), 10**4: (8.090e-2, 1.417, 6.634e-3),
                 10**5: (3.531e-2, 1.418, 2.131e-3), 10**6: (1.855e-2, 1.419, 8.126e-4),
                 10**7: (8.128e-3, 1.419, 2.040e-4), 10**8: (4.274e-3, 1.419, 8.082e-5)},
    "powerlaw1d": {10**3: (4.213e-2, 0.2722, 1.040e-2), 10**4: (1.693e-2, 0.2781, 3.273e-3),
                   10**5: (6.804e-3, 0.2796, 4.976e-4), 10**6: (3.281e-3, 0.2812, 2.454e-5),
                   10**7: (1.319e-3, 0.2805, 1.327e-5), 10**8: (7.631e-4, 0.2804, 5.985e-7)},
    "normal3d": {10**3: (1.539e-1, 4.259, 3.562e-2), 10**4: (6.741e-2, 4.255, 1.122e-2),
                 10**5: (3.531e-2, 4.257, 3.990e-3), 10**6: (1.546e-2, 4.256, 1.216e-3),
                 10**7: (5.644e-3, 4.257, 3.844e-4), 10**8: (2.473e-3, 4.257, 1.240e-4)},
}

DESK_SIZES = (10**3, 10**4, 10**5, 10**6)
CI_REPLICATES = 20
FULL_REPLICATES = 50


@dataclass(frozen=True)
class RunConfig:
    distribution: str
    estimator: str = "histogram"  # histogram | kde | kde:<kernel>
    entropy_method: str = "quadrature"
    sample_sizes: tuple[int, ...] = DESK_SIZES
    replicates: int = CI_REPLICATES
    base_seed: int = 0
    grid_spec: str = "auto"  # auto | geom:<lo>:<hi>:<num> | comma-separated values
    selection: str = "mean"  # mean | per_replicate
    on_boundary: str = "raise"  # raise | flag

    def __post_init__(self):
        dists.get_distribution(self.distribution)
        Estimator.parse(self.estimator)
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if not self.sample_sizes:
            raise InvalidArgumentError("sample_sizes must be nonempty")
        if any(n < 10 for n in self.sample_sizes):
            raise InvalidArgumentError("every sample size must be >= 10")
        if len(set(self.sample_sizes)) != len(self.sample_sizes):
            raise InvalidArgumentError("sample_sizes must not repeat")
        if self.replicates < 1:
            raise InvalidArgumentError("replicates must be >= 1")
        if self.base_seed < 0:
            raise InvalidArgumentError("base_seed must be >= 0")
        if self.entropy_method not in ("quadrature", "resubstitution"):
            raise InvalidArgumentError("entropy_method must be 'quadrature' or 'resubstitution'")
        if self.selection not in ("mean", "per_replicate"):
            raise InvalidArgumentError("selection must be 'mean' or 'per_replicate'")
        if self.on_boundary not in ("raise", "flag"):
            raise InvalidArgumentError("on_boundary must be 'raise' or 'flag'")
        self.explicit_grid()  # validate early

    @property
    def est(self) -> Estimator:
        return Estimator.parse(self.estimator)

    def explicit_grid(self) -> SmoothingGrid | None:
        spec = self.grid_spec.strip()
        if spec == "auto":
            return None
        try:
            if spec.startswith("geom:"):
                lo, hi, num = spec[5:].split(":")
                return SmoothingGrid.geometric(float(lo), float(hi), int(num), self.est.grid_kind)
            return SmoothingGrid(np.array([float(v) for v in spec.split(",")]), self.est.grid_kind)
        except ValueError:
            raise InvalidArgumentError(f"cannot parse grid_spec {spec!r}") from None

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, (tuple, list)):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {"replicates", "base_seed"}


def parse_config(text: str, source: str = "<config>", **overrides) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    fields = {f for f in RunConfig.__dataclass_fields__}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in fields:
            raise DataFormatError(f"{source}:{lineno}: expected one of {sorted(fields)} as 'key = value'")
        try:
            if key == "sample_sizes":
                values[key] = tuple(int(float(v)) for v in val.split(","))
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = val
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: bad value for {key}: {val!r}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "distribution" not in values:
        raise DataFormatError(f"{source}: 'distribution' is required")
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config(Path(path).read_text(), str(path), **overrides)


# -- running -----------------------------------------------------------------

def reference_parameter(config: RunConfig, n: int) -> float | None:
    """Scott bin width or AMISE bandwidth for this run, if defined."""
    est = config.est
    if est.kind == "histogram":
        return scott_bin_width(config.distribution, n)
    return amise_bandwidth(config.distribution, est.kernel, n)


def _task(args):
    dist_id, n, seed, params, est, method = args
    data = dists.sample(dist_id, n, seed).data
    return replicate_entropies(data, params, est, method)


@dataclass
class SizeResult:
    n: int
    grid: SmoothingGrid
    curve: EntropyCurve
    param_dm: float
    entropy_dm: float
    sigma_dm: float
    derivative_min: float
    index: int
    boundary_flag: bool
    boundary_side: str | None
    reference_param: float | None
    reference_entropy: float | None
    reference_sigma: float | None
    multiple_minima: bool = False
    curve_path: str | None = None
    seconds: float = 0.0  # wall time; kept out of the report so reruns stay byte-identical


def run_size(config: RunConfig, n: int, threads: int = 1) -> SizeResult:
    """One sample size: curve, selection and reference evaluation."""
    t0 = time.perf_counter()
    est = config.est
    seeds = [config.base_seed + r for r in range(config.replicates)]
    grid = config.explicit_grid()
    if grid is None:
        grid = default_grid(dists.sample(config.distribution, n, seeds[0]), est)
    ref = reference_parameter(config, n)
    params = grid.values if ref is None else np.append(grid.values, ref)
    tasks = [(config.distribution, n, s, params, est, config.entropy_method) for s in seeds]
    matrix = np.vstack(_run_tasks(_task, tasks, threads))
    curve = curve_from_matrix(grid, matrix[:, : len(grid)])
    side = None
    if config.selection == "mean":
        try:
            res = find_derivative_minimum(curve, s_true=dists.exact_entropy(config.distribution))
        except BoundaryMinimumError as err:
            if config.on_boundary == "raise":
                raise BoundaryMinimumError(err.side, err.result, n) from None
            res, side = err.result, err.side
        col = curve.per_replicate[:, res.index]
        sigma = float(col.std(ddof=1)) if col.size > 1 else 0.0
        param_dm, entropy_dm = res.param_dm, res.entropy_dm
    else:
        picks = per_replicate_minima(curve)
        if any(p.boundary_flag for p in picks) and config.on_boundary == "raise":
            bad = next(p for p in picks if p.boundary_flag)
            raise BoundaryMinimumError("lower" if bad.index == 0 else "upper", bad, n)
        ents = np.array([p.entropy_dm for p in picks])
        param_dm = float(np.exp(np.mean(np.log([p.param_dm for p in picks]))))
        entropy_dm = float(ents.mean())
        sigma = float(ents.std(ddof=1)) if ents.size > 1 else 0.0
        res = find_derivative_minimum(curve, raise_on_boundary=False)
        if any(p.boundary_flag for p in picks):
            side = "mixed"
    ref_col = matrix[:, -1] if ref is not None else None
    return SizeResult(
        n=n, grid=grid, curve=curve, param_dm=param_dm, entropy_dm=entropy_dm, sigma_dm=sigma,
        derivative_min=res.derivative_min, index=res.index,
        boundary_flag=side is not None, boundary_side=side,
        reference_param=ref,
        reference_entropy=None if ref_col is None else float(ref_col.mean()),
        reference_sigma=None if ref_col is None else (float(ref_col.std(ddof=1)) if ref_col.size > 1 else 0.0),
        multiple_minima=bool(res.diagnostics.get("multiple_minima", False)),
        seconds=time.perf_counter() - t0,
    )


@dataclass
class RunReport:
    config: RunConfig
    sizes: list[SizeResult] = field(default_factory=list)
    scaling: tuple[float, float] | None = None

    @property
    def per_n(self) -> dict[int, SizeResult]:
        return {s.n: s for s in self.sizes}

    @property
    def s_true(self) -> float:
        return dists.exact_entropy(self.config.distribution)

    def comparison(self) -> list[dict]:
        rows = []
        for s in self.sizes:
            if s.reference_param is None:
                continue
            rows.append({
                "n": s.n,
                "param_dm": s.param_dm,
                "param_ref": s.reference_param,
                "entropy_dm": s.entropy_dm,
                "entropy_ref": s.reference_entropy,
                "abs_err_dm": abs(s.entropy_dm - self.s_true),
                "abs_err_ref": abs(s.reference_entropy - self.s_true),
            })
        return rows

    def to_dict(self) -> dict:
        per_n = {}
        for s in self.sizes:
            per_n[str(s.n)] = {
                "param_dm": s.param_dm,
                "entropy_dm": s.entropy_dm,
                "sigma_dm": s.sigma_dm,
                "s_true": self.s_true,
                "derivative_min": s.derivative_min,
                "index": s.index,
                "boundary_flag": s.boundary_flag,
                "boundary_side": s.boundary_side,
                "multiple_minima": s.multiple_minima,
                "reference_param": s.reference_param,
                "reference_entropy": s.reference_entropy,
                "reference_sigma": s.reference_sigma,
                "curve_path": s.curve_path,
            }
        out = {"schema": REPORT_SCHEMA, "config": asdict(self.config), "per_n": per_n}
        out["config"]["sample_sizes"] = list(self.config.sample_sizes)
        out["scaling"] = None if self.scaling is None else {"exponent": self.scaling[0], "intercept": self.scaling[1]}
        out["comparison"] = self.comparison()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def curve_filename(config: RunConfig, n: int) -> str:
    return f"{config.distribution}_{config.est.label}_{n}.csv"


def run_experiment(config: RunConfig, out_dir=None, threads: int = 1) -> RunReport:
    """Run every sample size of ``config``; deterministic given the config.

    When ``out_dir`` is given each curve is written there as CSV, named
    ``{distribution}_{estimator}_{N}.csv``, together with ``report.json``
    unless the caller writes its own.
    """
    report = RunReport(config)
    for n in config.sample_sizes:
        res = run_size(config, n, threads)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = curve_filename(config, n)
            write_curve(res.curve, out / name, {"dist": config.distribution, "estimator": config.est.label,
                                                "n": n, "base_seed": config.base_seed})
            res.curve_path = name
        report.sizes.append(res)
    if len(report.sizes) >= 3:
        report.scaling = fit_scaling_exponent([s.n for s in report.sizes], [s.param_dm for s in report.sizes])
    return report


def compare_selectors(config: RunConfig, threads: int = 1, report: RunReport | None = None) -> list[dict]:
    """Entropy at the selected bandwidth versus at the AMISE bandwidth, per N."""
    if config.est.kind != "kde":
        raise InvalidArgumentError("compare_selectors needs a kernel estimator")
    if report is None:
        report = run_experiment(config, threads=threads)
    rows = []
    for s in report.sizes:
        rows.append({
            "n": s.n,
            "h_dm": s.param_dm,
            "h_amise": s.reference_param,
            "entropy_dm": s.entropy_dm,
            "entropy_amise": s.reference_entropy,
            "sigma_dm": s.sigma_dm,
            "sigma_amise": s.reference_sigma,
            "abs_err_dm": abs(s.entropy_dm - report.s_true),
            "abs_err_amise": abs(s.reference_entropy - report.s_true),
        })
    return rows


# -- profiles ----------------------------------------------------------------

PROFILES = ("table1", "table2", "fig4", "fig5")


def profile_configs(profile: str, max_n: int = 10**6, replicates: int = CI_REPLICATES,
                    base_seed: int = 0) -> list[RunConfig]:
    if profile not in PROFILES:
        raise InvalidArgumentError(f"unknown profile {profile!r}; valid profiles: {', '.join(PROFILES)}")
    sizes = tuple(n for n in (10**k for k in range(3, 9)) if n <= max_n)
    if not sizes:
        raise InvalidArgumentError(f"max_n={max_n} leaves no sample sizes (minimum 1000)")
    common = dict(sample_sizes=sizes, replicates=replicates, base_seed=base_seed, on_boundary="flag")
    if profile == "table1":
        return [RunConfig(d, "histogram", **common) for d in dists.DISTRIBUTION_IDS]
    if profile in ("table2", "fig4"):
        return [RunConfig(d, "kde", **common) for d in dists.DISTRIBUTION_IDS]
    return [RunConfig("normal1d", "kde", **common)]


def _reference_rows(config: RunConfig):
    table = REFERENCE_HISTOGRAM_ROWS if config.est.kind == "histogram" else REFERENCE_KDE_ROWS
    if config.est.kind == "kde" and config.est.kernel != "epanechnikov":
        return {}
    return table.get(config.distribution, {})


def _g(x) -> str:
    return "-" if x is None else f"{x:.4g}"


def markdown_summary(profile: str, reports: list[RunReport]) -> str:
    lines = [f"# Reproduction summary: {profile}", ""]
    for rep in reports:
        cfg = rep.config
        ref = _reference_rows(cfg)
        lines += [f"## {cfg.distribution}, {cfg.est.label}, {cfg.replicates} replicates", "",
                  f"Exact entropy: {rep.s_true:.6g}", "",
                  "| N | param_dm | published param | S_dm | published S | sigma | published sigma "
                  "| reference param | S at reference | boundary |",
                  "|---|---|---|---|---|---|---|---|---|---|"]
        for s in rep.sizes:
            pub = ref.get(s.n, (None, None, None))
            lines.append(f"| {s.n:.0e} | {_g(s.param_dm)} | {_g(pub[0])} | {s.entropy_dm:.4f} | {_g(pub[1])} "
                         f"| {_g(s.sigma_dm)} | {_g(pub[2])} | {_g(s.reference_param)} "
                         f"| {_g(s.reference_entropy)} | {s.boundary_side or 'no'} |")
        if rep.scaling is not None:
            lines += ["", f"Fitted exponent of param_dm against N: {rep.scaling[0]:.4f}"]
        lines.append("")
    return "\n".join(lines)


def write_profile_outputs(profile: str, reports: list[RunReport], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    combined = {"schema": REPORT_SCHEMA, "profile": profile, "runs": [r.to_dict() for r in reports]}
    (out / f"{profile}_report.json").write_text(json.dumps(combined, indent=2) + "\n")
    (out / f"{profile}_summary.md").write_text(markdown_summary(profile, reports))
    if profile == "fig4":
        rows = ["# schema=boltzent.fig4/1", "distribution,n,h_dm,h_amise"]
        for r in reports:
            for s in r.sizes:
                rows.append(",".join([r.config.distribution, str(s.n), fmt17(s.param_dm), fmt17(s.reference_param)]))
        for r in reports:
            if r.scaling is not None:
                rows.append(f"# {r.config.distribution} exponent={fmt17(r.scaling[0])} intercept={fmt17(r.scaling[1])}")
        (out / "fig4_bandwidths.csv").write_text("\n".join(rows) + "\n")
    if profile == "fig5":
        rows = ["# schema=boltzent.fig5/1", "distribution,n,entropy_dm,sigma_dm,entropy_amise,sigma_amise,s_true"]
        for r in reports:
            for c in compare_selectors(r.config, report=r):
                rows.append(",".join([r.config.distribution, str(c["n"])] + [fmt17(c[k]) for k in
                                     ("entropy_dm", "sigma_dm", "entropy_amise", "sigma_amise")] + [fmt17(r.s_true)]))
        (out / "fig5_entropies.csv").write_text("\n".join(rows) + "\n")


def reproduce(profile: str, out_dir, max_n: int = 10**6, replicates: int = CI_REPLICATES,
              base_seed: int = 0, threads: int = 1) -> list[RunReport]:
    reports = []
    for cfg in profile_configs(profile, max_n, replicates, base_seed):
        reports.append(run_experiment(cfg, out_dir=out_dir, threads=threads))
    write_profile_outputs(profile, reports, out_dir)
    return reports


def desk_suite_configs(replicates: int = CI_REPLICATES, base_seed: int = 0,
                       sizes: tuple[int, ...] = DESK_SIZES) -> list[RunConfig]:
    """Every distribution with both estimators, boundary minima flagged."""
    return [RunConfig(d, e, sample_sizes=sizes, replicates=replicates, base_seed=base_seed, on_boundary="flag")
            for e in ("histogram", "kde") for d in dists.DISTRIBUTION_IDS]


def run_desk_suite(replicates: int = CI_REPLICATES, base_seed: int = 0, threads: int = 1,
                   out_dir=None, sizes: tuple[int, ...] = DESK_SIZES, progress=None) -> dict:
    """Run :func:`desk_suite_configs` and return a JSON-ready summary.

    The summary maps ``"<distribution>/<estimator label>"`` to the run's
    ``RunReport.to_dict()`` plus its wall time in seconds.
    """
    out = {"schema": REPORT_SCHEMA, "replicates": replicates, "base_seed": base_seed,
           "threads": threads, "runs": {}}
    start = time.perf_counter()
    for cfg in desk_suite_configs(replicates, base_seed, sizes):
        t0 = time.perf_counter()
        rep = run_experiment(cfg, out_dir=out_dir, threads=threads)
        entry = rep.to_dict()
        entry["seconds"] = time.perf_counter() - t0
        for s in rep.sizes:
            row = entry["per_n"][str(s.n)]
            row["seconds"] = s.seconds
            row["min_entropy_step"] = float(np.min(np.diff(s.curve.mean_entropy)))
            row["grid"] = [float(s.grid.values[0]), float(s.grid.values[-1]), len(s.grid)]
        key = f"{cfg.distribution}/{cfg.est.label}"
        out["runs"][key] = entry
        if progress is not None:
            progress(f"{key}: {entry['seconds']:.1f} s")
    out["seconds"] = time.perf_counter() - start
    return out
