"""Seeded Monte Carlo experiments around the three swarm limit theorems.

Each experiment runs M independent replications (per-replication seed =
base seed XOR replication index), reduces them in replication order so the
result is independent of scheduling, and serializes a replayable result:
rerunning the same spec reproduces the same JSON apart from the timestamp.
The per-trajectory analysis stages are exposed as analyze_* functions so a
stored trajectory can be re-analyzed without re-running the swarm.
"""

import concurrent.futures
import datetime
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import serialize
from ._version import VERSION
from .clt_stats import (
    LAG_T,
    DISTANCE_FLOOR,
    _ols,
    ellipsoid_oscillatory,
    estimate_mu_sigma,
    h1_statistic,
    h2_statistic,
    h3_and_ci,
    oscillatory_step_variance,
    ratio_chain,
    region_nonoscillatory,
    theorem1_constants,
)
from .diagnostics import qq_data
from .objectives import lookup
from .regime import BURN_IN, DELTA_CONV, DELTA_OSC, THRESHOLD_Z, flag_belated, stagnation_table
from .swarm_core import PsoParams, run

ANALYSES = ("Oscillatory", "NonOscillatory", "SwarmFixedStep")


class SpecError(ValueError):
    """Raised when an experiment spec is internally inconsistent."""


class EmptyCohortError(RuntimeError):
    """No particles matched the analysis cohort; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    base: PsoParams
    replications: int
    analysis: str
    analysis_params: dict = field(default_factory=dict)
    objective: str = "himmelblau"
    output_dir: str = None

    def validate(self) -> None:
        problems = []
        if self.replications < 1:
            problems.append(f"replications must be >= 1, got {self.replications}")
        if self.analysis not in ANALYSES:
            problems.append(f"analysis must be one of {ANALYSES}, got {self.analysis!r}")
        if self.analysis == "SwarmFixedStep":
            fixed_n = self.analysis_params.get("fixed_n")
            if fixed_n is None:
                problems.append("SwarmFixedStep requires analysis_params.fixed_n")
            elif not 0 < fixed_n <= self.base.iterations:
                problems.append(
                    f"fixed_n must be in [1, {self.base.iterations}], got {fixed_n}")
        mode = self.analysis_params.get("mode", "plugin")
        if mode not in ("plugin", "known"):
            problems.append(f"mode must be 'plugin' or 'known', got {mode!r}")
        if problems:
            raise SpecError("; ".join(problems))
        self.base.validate()
        lookup(self.objective)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "objective": self.objective,
            "base": serialize.params_to_dict(self.base),
            "replications": self.replications,
            "analysis": self.analysis,
            "analysis_params": dict(self.analysis_params),
            "output_dir": self.output_dir,
        }


def spec_from_dict(d: dict) -> ExperimentSpec:
    try:
        spec = ExperimentSpec(
            name=d["name"],
            base=serialize.params_from_dict(d["base"]),
            replications=d["replications"],
            analysis=d["analysis"],
            analysis_params=dict(d.get("analysis_params", {})),
            objective=d.get("objective", "himmelblau"),
            output_dir=d.get("output_dir"),
        )
    except KeyError as exc:
        raise SpecError(f"experiment spec missing field {exc}") from exc
    spec.validate()
    return spec


def load_spec(path) -> ExperimentSpec:
    return spec_from_dict(serialize.read_json(path))


def fixture_path(name: str):
    """Path of a bundled experiment spec, e.g. 'paper_osc' or 'smoke_swarm'."""
    import pathlib

    path = pathlib.Path(__file__).parent / "fixtures" / f"{name}.json"
    if not path.exists():
        have = sorted(p.stem for p in path.parent.glob("*.json"))
        raise FileNotFoundError(f"no bundled spec {name!r}; have {have}")
    return path


def load_fixture(name: str) -> ExperimentSpec:
    return load_spec(fixture_path(name))


def save_spec(spec: ExperimentSpec, path) -> None:
    serialize.write_json(spec.to_dict(), path)


@dataclass
class ExperimentResult:
    name: str
    analysis: str
    spec: dict                   # full spec dict for replay
    seeds: list                  # per-replication seeds actually used
    per_replication: list        # one summary dict per replication
    estimates: dict
    diagnostics: dict            # qq blocks, coverage
    h_samples: dict              # pooled raw statistic samples, by label
    warnings: list
    code_version: str = VERSION
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "analysis": self.analysis,
            "spec": self.spec,
            "spec_digest": serialize.digest(self.spec),
            "seeds": list(self.seeds),
            "per_replication": self.per_replication,
            "estimates": self.estimates,
            "diagnostics": self.diagnostics,
            "h_samples": self.h_samples,
            "warnings": list(self.warnings),
            "code_version": self.code_version,
            "timestamp": self.timestamp,
        }

    @property
    def digest(self) -> str:
        return serialize.digest(self.to_dict())


def rep_seed(base_seed: int, m: int) -> int:
    return int(base_seed) ^ int(m)


def _map_replications(fn, M: int, threads: int) -> list:
    if threads <= 1:
        return [fn(m) for m in range(M)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(M)))


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _qq_block(qq) -> dict:
    return {
        "qq_corr": qq.qq_corr,
        "theoretical": [float(t) for t in qq.theoretical],
        "sample": [float(s) for s in qq.sample],
    }


def _nearest_optimum(point, optima) -> np.ndarray:
    opts = np.asarray(optima, dtype=float)
    d2 = np.sum((opts - np.asarray(point, dtype=float)) ** 2, axis=1)
    return opts[int(np.argmin(d2))]


def _run_replication(spec: ExperimentSpec, seed: int, swarm_size: int = None):
    params = replace(spec.base, seed=seed)
    if swarm_size is not None and swarm_size != params.swarm_size:
        params = replace(params, swarm_size=swarm_size)
    f = lookup(spec.objective)
    return run(params, f, run_id=f"{spec.name}-{seed}")


def write_result(result: ExperimentResult, output_dir, svg: bool = False) -> None:
    """Persist result.json, qq_*.csv, h_stats.csv, regions.csv (+ optional SVGs)."""
    import csv
    import os

    from .clt_stats import constraint_grid
    from .diagnostics import QQData

    os.makedirs(output_dir, exist_ok=True)
    serialize.write_json(result.to_dict(), os.path.join(output_dir, "result.json"))
    for label, block in result.diagnostics.get("qq", {}).items():
        qq = QQData(theoretical=np.asarray(block["theoretical"]),
                    sample=np.asarray(block["sample"]), qq_corr=block["qq_corr"])
        serialize.write_qq_csv(qq, os.path.join(output_dir, f"qq_{label}.csv"))
        if svg:
            serialize.write_qq_svg(qq, os.path.join(output_dir, f"qq_{label}.svg"))
    with open(os.path.join(output_dir, "h_stats.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "index", "value"])
        for label, values in result.h_samples.items():
            for i, val in enumerate(values):
                w.writerow([label, i, repr(float(val))])
    grid_n = int(result.spec.get("analysis_params", {}).get("grid_n", 50))
    serialize.write_regions_csv(constraint_grid(grid_n),
                                os.path.join(output_dir, "regions.csv"))


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    spec.validate()
    if spec.analysis == "Oscillatory":
        result = run_oscillatory_experiment(spec, threads)
    elif spec.analysis == "NonOscillatory":
        result = run_nonoscillatory_experiment(spec, threads)
    else:
        result = run_swarm_experiment(spec, threads)
    if spec.output_dir:
        write_result(result, spec.output_dir,
                     svg=bool(spec.analysis_params.get("svg", False)))
    return result


# --- per-trajectory analysis stages (pure) ----------------------------------

def analyze_oscillatory(traj, burn_in: int = BURN_IN, delta_osc: float = DELTA_OSC,
                        alpha: float = 0.05, mode: str = "plugin",
                        optima: np.ndarray = None) -> dict:
    """Studentized window-mean statistics of one run's oscillating particles.

    Cohort: particles whose pbest and nbest are constant from burn_in to the
    end with attractor gap above delta_osc. Each contributes H1 divided by its
    own windowed standard deviation times sqrt(C/step_var) per coordinate, and
    an ellipsoid membership hit for theta on the theorem scaling. Returns the
    raw materials plus the first tested particle's ellipsoid region.
    """
    params = traj.params
    if burn_in >= traj.n_iters:
        raise SpecError(f"burn_in {burn_in} must be < iterations {traj.n_iters}")
    C = theorem1_constants(params.omega, params.c)[1]
    step_var = oscillatory_step_variance(params.omega, params.c)
    stud_factor = math.sqrt(C / step_var)
    d = traj.dim
    _, _, since = stagnation_table(traj)
    warnings = []
    stud = [[] for _ in range(d)]
    hits = 0
    tested = 0
    cohort = 0
    first_region = None
    for i in range(traj.swarm_size):
        if not (0 <= since[i] <= burn_in):
            continue
        p = traj.pbest[-1, i]
        g = traj.nbest[-1, i]
        if float(np.linalg.norm(p - g)) <= delta_osc:
            continue
        if mode == "known" and optima is not None and len(optima):
            p = _nearest_optimum(p, optima)
            g = _nearest_optimum(g, optima)
            if np.array_equal(p, g):
                warnings.append(f"particle {i}: attractors snap to one optimum; skipped")
                continue
        cohort += 1
        path = traj.x[burn_in + 1:, i, :]
        osc = h1_statistic(path, p, g, params.omega, params.c)
        sd = path.std(axis=0)
        if np.any(np.abs(osc.delta) < 1e-6) or np.any(sd <= 0.0):
            warnings.append(f"particle {i}: near-singular coordinate; skipped")
            continue
        for k in range(d):
            stud[k].append(float(osc.H1[k] / (sd[k] * stud_factor)))
        region = ellipsoid_oscillatory(osc, alpha)
        if first_region is None:
            first_region = region
        tested += 1
        if region.contains(osc.theta):
            hits += 1
    return {"cohort": cohort, "tested": tested, "ellipse_hits": hits,
            "stud": stud, "warnings": warnings, "first_region": first_region}


def _converging_cohort(traj, target: np.ndarray, target_tol: float, delta_conv: float):
    p = traj.pbest[-1]
    g = traj.nbest[-1]
    near_p = np.linalg.norm(p - target, axis=1) <= target_tol
    near_g = np.linalg.norm(g - target, axis=1) <= target_tol
    tight = np.linalg.norm(p - g, axis=1) <= delta_conv
    return np.flatnonzero(near_p & near_g & tight)


def _analysis_window(dist: np.ndarray, floor: float, start_dist: float):
    """Longest usable run after the last excursion beyond start_dist.

    Returns (lo, hi) of the longest contiguous run with dist > floor, starting
    after the last index where dist > start_dist; (0, -1) when empty.
    """
    usable = dist > floor
    exceed = np.flatnonzero(dist > start_dist)
    start = int(exceed[-1]) + 1 if exceed.size else 0
    best_lo, best_hi = 0, -1
    run_lo = None
    for idx in range(start, len(dist)):
        if usable[idx] and run_lo is None:
            run_lo = idx
        elif not usable[idx] and run_lo is not None:
            if idx - run_lo > best_hi - best_lo:
                best_lo, best_hi = run_lo, idx - 1
            run_lo = None
    if run_lo is not None and len(dist) - run_lo > best_hi - best_lo:
        best_lo, best_hi = run_lo, len(dist) - 1
    return best_lo, best_hi


def analyze_nonoscillatory(traj, target, target_tol: float = 1e-3,
                           delta_conv: float = DELTA_CONV, floor: float = DISTANCE_FLOOR,
                           start_dist: float = 1.0, min_points: int = 30,
                           fixed_n: int = 100, mode: str = "plugin") -> dict:
    """Ratio chains and linearity stats of one run's converging particles.

    Per particle the distance reference is its own final neighborhood best (a
    constant vector); mode 'known' pins the reference to the target instead.
    The window opens after the last excursion beyond start_dist and closes at
    the floor. The linearity r-squared is measured on the log of the euclidean
    distance; chains and the fixed-step inputs use the first coordinate.
    """
    target = np.asarray(target, dtype=float)
    cohort = _converging_cohort(traj, target, target_tol, delta_conv)
    chains = []
    norm_r2 = []
    h2_inputs = []              # (x at fixed_n, reference coordinate)
    short = 0
    for i in cohort:
        a = target if mode == "known" else traj.nbest[-1, i]
        nd = np.linalg.norm(traj.x[:, i, :] - a, axis=1)
        lo, hi = _analysis_window(nd, floor, start_dist)
        if hi - lo + 1 < min_points:
            short += 1
            continue
        _, r2 = _ols(np.arange(lo, hi + 1, dtype=float), np.log(nd[lo:hi + 1]))
        norm_r2.append(r2)
        d0 = np.abs(traj.x[:, i, 0] - a[0])
        lo0, hi0 = _analysis_window(d0, floor, start_dist)
        if hi0 - lo0 + 1 >= min_points:
            chains.append(ratio_chain(traj.x[:, i, 0], float(a[0]),
                                      floor=floor, window=(lo0, hi0)))
            if lo0 <= fixed_n <= hi0:
                h2_inputs.append((float(traj.x[fixed_n, i, 0]), float(a[0])))
    return {"cohort": int(len(cohort)), "short_windows": short, "chains": chains,
            "norm_r2": norm_r2, "h2_inputs": h2_inputs}


def _iterated_belated_filter(ld: dict, threshold_z: float):
    """Re-apply the robust upper-tail filter until no new ids are flagged."""
    removed = set()
    current = dict(ld)
    while len(current) >= 5:
        flagged = flag_belated(current, threshold_z)
        if not flagged:
            break
        removed |= flagged
        current = {i: v for i, v in current.items() if i not in flagged}
    return removed


def analyze_swarm(traj, fixed_n: int, alpha: float = 0.05, target=(3.0, 2.0),
                  target_tol: float = 1e-3, delta_conv: float = DELTA_CONV,
                  threshold_z: float = THRESHOLD_Z, floor: float = DISTANCE_FLOOR,
                  mode: str = "plugin", objective_fn=None) -> dict:
    """Fixed-step cross-sectional sample of one run's converging sub-swarm.

    The distance reference is the best personal best within the cohort (mode
    'known' uses the target itself). Log-distances at fixed_n feed the
    iterated belated filter; the kept sample yields the cross-sectional mean
    statistic and the interval for the reference's first coordinate.
    """
    target = np.asarray(target, dtype=float)
    cohort = _converging_cohort(traj, target, target_tol, delta_conv)
    out = {"cohort": int(len(cohort))}
    if len(cohort) < 10:
        out["skipped"] = "cohort below 10 particles"
        return out
    if mode == "known" or objective_fn is None:
        g_ref = target
    else:
        pb = traj.pbest[-1, cohort]
        g_ref = pb[int(np.argmin(objective_fn(pb)))]
    dist = np.linalg.norm(traj.x[fixed_n, cohort, :] - g_ref, axis=1)
    ok = dist > floor
    ld = {int(cohort[j]): float(np.log(dist[j])) for j in range(len(cohort)) if ok[j]}
    removed = _iterated_belated_filter(ld, threshold_z)
    kept = [i for i in ld if i not in removed]
    out["usable"] = len(ld)
    out["removed"] = len(removed)
    out["kept"] = len(kept)
    if len(kept) < 10:
        out["skipped"] = "fewer than 10 particles after filtering"
        return out
    out["ld_all"] = list(ld.values())
    out["ld_kept"] = [ld[i] for i in kept]
    id_pos = {int(pid): j for j, pid in enumerate(cohort)}
    xs = traj.x[fixed_n, cohort, 0]
    keep_pos = [id_pos[i] for i in kept]
    clt, region = h3_and_ci(xs, float(g_ref[0]), alpha,
                            keep_ids=keep_pos, n_fixed=fixed_n)
    lo, hi = region.payload["bounds"][0]
    out.update({
        "H3": clt.H3, "xbar": clt.xbar_S, "sigma_hat": math.sqrt(clt.sigma2_hat),
        "S_used": clt.S_used, "ci": [float(lo), float(hi)],
        "covered": bool(region.contains(float(target[0]))),
        "region": region, "g_ref": [float(v) for v in np.atleast_1d(g_ref)],
    })
    return out


# --- experiment drivers ------------------------------------------------------

def run_oscillatory_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Pool studentized window-mean statistics across replications."""
    ap = spec.analysis_params
    burn_in = int(ap.get("burn_in", BURN_IN))
    delta_osc = float(ap.get("delta_osc", DELTA_OSC))
    alpha = float(ap.get("alpha", 0.05))
    mode = ap.get("mode", "plugin")
    allow_empty = bool(ap.get("allow_empty", False))
    params = spec.base
    if burn_in >= params.iterations:
        raise SpecError(f"burn_in {burn_in} must be < iterations {params.iterations}")
    L, C = theorem1_constants(params.omega, params.c)
    optima = lookup(spec.objective).refined_optima
    d = params.dim
    seeds = [rep_seed(params.seed, m) for m in range(spec.replications)]

    def one(m: int) -> dict:
        traj = _run_replication(spec, seeds[m])
        rep = analyze_oscillatory(traj, burn_in=burn_in, delta_osc=delta_osc,
                                  alpha=alpha, mode=mode, optima=optima)
        rep["seed"] = seeds[m]
        return rep

    reps = _map_replications(one, spec.replications, threads)
    pooled = [[] for _ in range(d)]
    hits = 0
    tested = 0
    cohort = 0
    warnings = []
    per_rep = []
    for r in reps:
        for k in range(d):
            pooled[k].extend(r["stud"][k])
        hits += r["ellipse_hits"]
        tested += r["tested"]
        cohort += r["cohort"]
        warnings.extend(r["warnings"])
        per_rep.append({"seed": r["seed"], "cohort": r["cohort"],
                        "tested": r["tested"], "ellipse_hits": r["ellipse_hits"]})

    if cohort == 0 and not allow_empty:
        raise EmptyCohortError(
            "no oscillating particles found",
            diagnostics={"replications": spec.replications, "burn_in": burn_in,
                         "delta_osc": delta_osc,
                         "per_replication_cohorts": [r["cohort"] for r in reps]},
        )

    diagnostics = {"qq": {}}
    estimates = {
        "pooled_cohort": cohort,
        "tested": tested,
        "alpha": alpha,
        "burn_in": burn_in,
        "window_length": params.iterations - burn_in,
        "L": L,
        "C": C,
        "step_variance_factor": oscillatory_step_variance(params.omega, params.c),
        "mode": mode,
    }
    h_samples = {}
    if tested > 0:
        estimates["ellipse_coverage"] = hits / tested
        for k in range(d):
            h_samples[f"h1_studentized_coord{k}"] = pooled[k]
            if len(pooled[k]) >= 10:
                qq = qq_data(pooled[k])
                diagnostics["qq"][f"h1_coord{k}"] = _qq_block(qq)
                estimates[f"qq_corr_coord{k}"] = qq.qq_corr
            else:
                warnings.append(f"coordinate {k}: cohort too small for a QQ block")
    else:
        warnings.append("empty oscillating cohort; no pooled statistics computed")
    diagnostics["coverage"] = estimates.get("ellipse_coverage")

    return ExperimentResult(
        name=spec.name, analysis=spec.analysis, spec=spec.to_dict(), seeds=seeds,
        per_replication=per_rep, estimates=estimates, diagnostics=diagnostics,
        h_samples=h_samples, warnings=warnings, timestamp=_timestamp(),
    )


def run_nonoscillatory_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Estimate decay rate and dispersion of particles converging to a target."""
    ap = spec.analysis_params
    alpha = float(ap.get("alpha", 0.05))
    lag_T = int(ap.get("lag_T", LAG_T))
    fixed_n = int(ap.get("fixed_n", 100))
    floor = float(ap.get("floor", DISTANCE_FLOOR))
    start_dist = float(ap.get("start_dist", 1.0))
    min_points = int(ap.get("min_points", 30))
    target_tol = float(ap.get("target_tol", 1e-3))
    delta_conv = float(ap.get("delta_conv", DELTA_CONV))
    r2_threshold = float(ap.get("r2_threshold", 0.95))
    mode = ap.get("mode", "plugin")
    allow_empty = bool(ap.get("allow_empty", False))
    params = spec.base
    if not 0 < fixed_n <= params.iterations:
        raise SpecError(f"fixed_n must be in [1, {params.iterations}], got {fixed_n}")
    if min_points <= lag_T + 6:
        raise SpecError(f"min_points {min_points} too small for lag_T {lag_T}")
    obj = lookup(spec.objective)
    target = np.asarray(ap.get("target", [3.0, 2.0]), dtype=float)
    if target.shape != (params.dim,):
        raise SpecError(f"target must have dim {params.dim}")
    if mode == "known" and len(obj.refined_optima):
        target = _nearest_optimum(target, obj.refined_optima)
    seeds = [rep_seed(params.seed, m) for m in range(spec.replications)]

    def one(m: int) -> dict:
        traj = _run_replication(spec, seeds[m])
        rep = analyze_nonoscillatory(
            traj, target, target_tol=target_tol, delta_conv=delta_conv, floor=floor,
            start_dist=start_dist, min_points=min_points, fixed_n=fixed_n, mode=mode)
        rep["seed"] = seeds[m]
        return rep

    reps = _map_replications(one, spec.replications, threads)
    chains = []
    norm_r2 = []
    h2_inputs = []
    per_rep = []
    warnings = []
    cohort_total = 0
    for r in reps:
        chains.extend(r["chains"])
        norm_r2.extend(r["norm_r2"])
        h2_inputs.extend(r["h2_inputs"])
        cohort_total += r["cohort"]
        per_rep.append({"seed": r["seed"], "cohort": r["cohort"],
                        "short_windows": r["short_windows"],
                        "chains": len(r["chains"])})

    if not chains:
        if not allow_empty:
            raise EmptyCohortError(
                "no converging particles with a usable regression window",
                diagnostics={"cohort_total": cohort_total, "target": target.tolist(),
                             "target_tol": target_tol, "min_points": min_points},
            )
        warnings.append("empty converging cohort; no pooled statistics computed")
        estimates = {"pooled_cohort": cohort_total, "chains": 0, "mode": mode}
        return ExperimentResult(
            name=spec.name, analysis=spec.analysis, spec=spec.to_dict(), seeds=seeds,
            per_replication=per_rep, estimates=estimates, diagnostics={"qq": {}},
            h_samples={}, warnings=warnings, timestamp=_timestamp(),
        )

    est = estimate_mu_sigma(chains, lag_T=lag_T)
    warnings.extend(est.warnings)
    ln10 = math.log(10.0)
    sigma_ln = math.sqrt(est.sigma2_x)
    norm_r2 = np.asarray(norm_r2)
    estimates = {
        "pooled_cohort": cohort_total,
        "chains": len(chains),
        "mu_x": est.mu_x,
        "sigma_x": sigma_ln,
        "mu_x_log10": est.mu_x / ln10,
        "sigma_x_log10": sigma_ln / ln10,
        "lag_T": lag_T,
        "r2_threshold": r2_threshold,
        "r2_fraction": float(np.mean(norm_r2 >= r2_threshold)),
        "fixed_n": fixed_n,
        "alpha": alpha,
        "mode": mode,
    }
    # the stagnation law additionally assumes the chain is positive Harris
    # recurrent, which a finite run cannot certify
    warnings.append("recurrence of the stagnation chain is assumed, not verified")
    diagnostics = {"qq": {}}
    h_samples = {
        "slope_ln_per_chain": [float(_ols(ch.ns.astype(float), ch.log_dist)[0])
                               for ch in chains],
        "norm_r2": [float(v) for v in norm_r2],
    }
    h2_vals = []
    for x_n, a0 in h2_inputs:
        try:
            h2_vals.append(h2_statistic(x_n, a0, fixed_n, est.mu_x, floor=floor))
        except Exception:
            continue
    if len(h2_vals) >= 10:
        qq = qq_data(h2_vals)
        diagnostics["qq"]["h2"] = _qq_block(qq)
        estimates["h2_qq_corr"] = qq.qq_corr
        estimates["h2_count"] = len(h2_vals)
        h_samples["h2"] = [float(v) for v in h2_vals]
    else:
        warnings.append("too few rate-centered statistics for a QQ block")

    return ExperimentResult(
        name=spec.name, analysis=spec.analysis, spec=spec.to_dict(), seeds=seeds,
        per_replication=per_rep, estimates=estimates, diagnostics=diagnostics,
        h_samples=h_samples, warnings=warnings, timestamp=_timestamp(),
    )


def run_swarm_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Fixed-step cross-sectional statistics for the converging sub-swarm.

    Replication 0 runs at the base swarm size and supplies the QQ contrast
    (log-distance sample at fixed_n, unfiltered vs belated-filtered); every
    replication, including 0, contributes an interval-coverage trial at level
    1 - alpha. coverage_swarm_size, when set, resizes replications 1..M-1.
    """
    ap = spec.analysis_params
    alpha = float(ap.get("alpha", 0.05))
    fixed_n = int(ap["fixed_n"])
    floor = float(ap.get("floor", DISTANCE_FLOOR))
    target_tol = float(ap.get("target_tol", 1e-3))
    delta_conv = float(ap.get("delta_conv", DELTA_CONV))
    threshold_z = float(ap.get("threshold_z", THRESHOLD_Z))
    coverage_S = ap.get("coverage_swarm_size")
    mode = ap.get("mode", "plugin")
    allow_empty = bool(ap.get("allow_empty", False))
    params = spec.base
    obj = lookup(spec.objective)
    target = np.asarray(ap.get("target", [3.0, 2.0]), dtype=float)
    if target.shape != (params.dim,):
        raise SpecError(f"target must have dim {params.dim}")
    seeds = [rep_seed(params.seed, m) for m in range(spec.replications)]

    def one(m: int) -> dict:
        size = params.swarm_size if m == 0 or coverage_S is None else int(coverage_S)
        traj = _run_replication(spec, seeds[m], swarm_size=size)
        rep = analyze_swarm(traj, fixed_n, alpha=alpha, target=target,
                            target_tol=target_tol, delta_conv=delta_conv,
                            threshold_z=threshold_z, floor=floor, mode=mode,
                            objective_fn=obj)
        rep["seed"] = seeds[m]
        rep["swarm_size"] = size
        return rep

    reps = _map_replications(one, spec.replications, threads)
    per_rep = []
    warnings = []
    trials = 0
    covered = 0
    h3_vals = []
    for r in reps:
        per_rep.append({k: v for k, v in r.items()
                        if k not in ("ld_all", "ld_kept", "region")})
        if "skipped" in r:
            warnings.append(f"seed {r['seed']}: {r['skipped']}")
            continue
        trials += 1
        covered += bool(r["covered"])
        h3_vals.append(r["H3"])

    qq_rep = reps[0]
    diagnostics = {"qq": {}}
    estimates = {
        "fixed_n": fixed_n,
        "alpha": alpha,
        "mode": mode,
        "replications": spec.replications,
        "coverage_trials": trials,
    }
    h_samples = {"h3_per_replication": [float(v) for v in h3_vals]}
    if "ld_all" not in qq_rep:
        if not allow_empty:
            raise EmptyCohortError(
                "replication 0 produced no usable converging cohort",
                diagnostics={"cohort": qq_rep.get("cohort", 0),
                             "target": target.tolist(), "target_tol": target_tol},
            )
        warnings.append("replication 0 cohort unusable; QQ contrast skipped")
    else:
        qq_unf = qq_data(qq_rep["ld_all"])
        qq_fil = qq_data(qq_rep["ld_kept"])
        diagnostics["qq"]["logdist_unfiltered"] = _qq_block(qq_unf)
        diagnostics["qq"]["logdist_filtered"] = _qq_block(qq_fil)
        estimates.update({
            "qq_corr_unfiltered": qq_unf.qq_corr,
            "qq_corr_filtered": qq_fil.qq_corr,
            "qq_cohort": qq_rep["cohort"],
            "qq_removed": qq_rep["removed"],
            "S_used": qq_rep["kept"],
        })
        h_samples["log_dist_unfiltered"] = qq_rep["ld_all"]
        h_samples["log_dist_filtered"] = qq_rep["ld_kept"]
    if trials:
        estimates["ci_coverage"] = covered / trials
        estimates["min_rep_cohort"] = min(r["cohort"] for r in reps)
    diagnostics["coverage"] = estimates.get("ci_coverage")

    return ExperimentResult(
        name=spec.name, analysis=spec.analysis, spec=spec.to_dict(), seeds=seeds,
        per_replication=per_rep, estimates=estimates, diagnostics=diagnostics,
        h_samples=h_samples, warnings=warnings, timestamp=_timestamp(),
    )


# --- stored-trajectory analysis ----------------------------------------------

def analyze_trajectory(traj, analysis: str, analysis_params: dict = None) -> dict:
    """Re-run one analysis stage on a stored trajectory; returns result JSON.

    The returned dict follows the stats layout {theorem, params, estimates,
    region, mode, warnings}. Theorem numbering: 1 oscillatory window means,
    2 stagnation decay rates, 3 fixed-step cross sections.
    """
    ap = dict(analysis_params or {})
    if analysis not in ANALYSES:
        raise SpecError(f"analysis must be one of {ANALYSES}, got {analysis!r}")
    if traj.params is None:
        raise SpecError("trajectory carries no engine parameters; cannot analyze")
    mode = ap.get("mode", "plugin")
    alpha = float(ap.get("alpha", 0.05))
    warnings = []
    region = None
    try:
        obj = lookup(traj.objective)
    except KeyError:
        obj = None
        warnings.append(f"objective {traj.objective!r} not registered; plugin refs only")

    if analysis == "Oscillatory":
        rep = analyze_oscillatory(
            traj, burn_in=int(ap.get("burn_in", BURN_IN)),
            delta_osc=float(ap.get("delta_osc", DELTA_OSC)), alpha=alpha, mode=mode,
            optima=None if obj is None else obj.refined_optima)
        warnings.extend(rep["warnings"])
        estimates = {"cohort": rep["cohort"], "tested": rep["tested"]}
        if rep["tested"]:
            estimates["ellipse_coverage"] = rep["ellipse_hits"] / rep["tested"]
            for k in range(traj.dim):
                if len(rep["stud"][k]) >= 10:
                    estimates[f"qq_corr_coord{k}"] = qq_data(rep["stud"][k]).qq_corr
        region = rep["first_region"]
        theorem = 1
    elif analysis == "NonOscillatory":
        fixed_n = int(ap.get("fixed_n", min(100, traj.n_iters)))
        rep = analyze_nonoscillatory(
            traj, np.asarray(ap.get("target", [3.0, 2.0]), dtype=float),
            target_tol=float(ap.get("target_tol", 1e-3)),
            delta_conv=float(ap.get("delta_conv", DELTA_CONV)),
            floor=float(ap.get("floor", DISTANCE_FLOOR)),
            start_dist=float(ap.get("start_dist", 1.0)),
            min_points=int(ap.get("min_points", 30)), fixed_n=fixed_n, mode=mode)
        estimates = {"cohort": rep["cohort"], "chains": len(rep["chains"]),
                     "short_windows": rep["short_windows"]}
        if rep["chains"]:
            est = estimate_mu_sigma(rep["chains"], lag_T=int(ap.get("lag_T", LAG_T)))
            warnings.extend(est.warnings)
            sigma_ln = math.sqrt(est.sigma2_x)
            estimates.update({
                "mu_x": est.mu_x, "sigma_x": sigma_ln,
                "mu_x_log10": est.mu_x / math.log(10.0),
                "sigma_x_log10": sigma_ln / math.log(10.0),
                "r2_fraction": float(np.mean(np.asarray(rep["norm_r2"]) >= 0.95)),
            })
            if rep["h2_inputs"]:
                x_n, a0 = rep["h2_inputs"][0]
                region = region_nonoscillatory(x_n, fixed_n, est.mu_x, sigma_ln, alpha,
                                               form=ap.get("form", "TheoremConsistent"))
        else:
            warnings.append("no usable ratio chains in this trajectory")
        theorem = 2
    else:
        fixed_n = int(ap.get("fixed_n", min(200, traj.n_iters)))
        rep = analyze_swarm(
            traj, fixed_n, alpha=alpha, target=ap.get("target", (3.0, 2.0)),
            target_tol=float(ap.get("target_tol", 1e-3)),
            delta_conv=float(ap.get("delta_conv", DELTA_CONV)),
            threshold_z=float(ap.get("threshold_z", THRESHOLD_Z)),
            floor=float(ap.get("floor", DISTANCE_FLOOR)), mode=mode,
            objective_fn=obj)
        estimates = {k: rep[k] for k in
                     ("cohort", "usable", "removed", "kept", "H3", "xbar",
                      "sigma_hat", "S_used", "g_ref") if k in rep}
        if "skipped" in rep:
            warnings.append(rep["skipped"])
        if "ld_all" in rep and len(rep["ld_all"]) >= 10:
            estimates["qq_corr_unfiltered"] = qq_data(rep["ld_all"]).qq_corr
            estimates["qq_corr_filtered"] = qq_data(rep["ld_kept"]).qq_corr
        region = rep.get("region")
        theorem = 3
    return serialize.stats_json(
        theorem=theorem, params=serialize.params_to_dict(traj.params),
        estimates=estimates, region=region, mode=mode, warnings=warnings)
