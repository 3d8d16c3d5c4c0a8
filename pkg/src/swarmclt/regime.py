"""Particle regime classification: oscillatory vs converging attractors.

A particle is stagnant once its personal best and neighborhood best stop
changing. Both change only at improvement events, so exact vector equality is
well-defined in floating point and is the stagnation test used throughout.
Regimes are read off the limit attractors p (personal best) and g
(neighborhood best): oscillatory means p and g stay apart, converging means
they coincide (up to delta_conv) and the particle contracts onto them.
"""

from dataclasses import dataclass

import numpy as np

from .swarm_core import Trajectory

DELTA_OSC = 1e-2
DELTA_CONV = 1e-3
BURN_IN = 500
WINDOW_W = 100
THRESHOLD_Z = 3.5

KIND_OSCILLATORY = "Oscillatory"
KIND_CONVERGING = "Converging"
KIND_BELATED = "Belated"
KIND_UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class StagnationReport:
    particle: int
    last_pbest_change: int
    last_nbest_change: int
    stagnant_since: int = None   # None when the stagnant span is too short


@dataclass(frozen=True)
class RegimeLabel:
    kind: str
    attractor_p: np.ndarray
    attractor_g: np.ndarray
    window: tuple               # (n_start, n_end) where stagnation holds


def _last_change_iters(series: np.ndarray) -> np.ndarray:
    """Iteration index at which each particle's vector last changed (0 if never).

    series has shape (N+1, S, d); a change between n-1 and n is attributed to
    iteration n, i.e. the constant suffix starts at the returned index.
    """
    if series.shape[0] < 2:
        return np.zeros(series.shape[1], dtype=int)
    changed = np.any(series[1:] != series[:-1], axis=2)   # (N, S)
    out = np.zeros(series.shape[1], dtype=int)
    any_ch = changed.any(axis=0)
    # argmax on the reversed axis finds the latest change
    out[any_ch] = changed.shape[0] - np.argmax(changed[::-1][:, any_ch], axis=0)
    return out


def stagnation_table(traj: Trajectory, window_w: int = WINDOW_W):
    """Vectorized stagnation bookkeeping for all particles.

    Returns (last_pbest_change, last_nbest_change, stagnant_since) arrays;
    stagnant_since is -1 where the stagnant suffix is shorter than window_w.
    """
    if window_w < 1:
        raise ValueError("window_w must be >= 1")
    lp = _last_change_iters(traj.pbest)
    lg = _last_change_iters(traj.nbest)
    since = np.maximum(lp, lg)
    too_short = traj.n_iters - since < window_w
    since = np.where(too_short, -1, since)
    return lp, lg, since


def detect_stagnation(traj: Trajectory, particle: int, window_w: int = WINDOW_W) -> StagnationReport:
    """Find the first iteration from which pbest and nbest never change again."""
    if not 0 <= particle < traj.swarm_size:
        raise KeyError(f"unknown particle id {particle}")
    lp, lg, since = stagnation_table(traj, window_w)
    s = int(since[particle])
    return StagnationReport(
        particle=particle,
        last_pbest_change=int(lp[particle]),
        last_nbest_change=int(lg[particle]),
        stagnant_since=None if s < 0 else s,
    )


def classify(traj: Trajectory, particle: int, burn_in: int = BURN_IN,
             delta_osc: float = DELTA_OSC, delta_conv: float = DELTA_CONV,
             window_w: int = WINDOW_W, belated_ids=None) -> RegimeLabel:
    """Label one particle from its stagnation window and limit attractors.

    Oscillatory requires stagnation established by burn_in and attractors more
    than delta_osc apart; Converging requires stagnation with attractors within
    delta_conv. Belated refinement needs population context (see flag_belated),
    so it applies only when the caller passes the flagged id set.
    """
    if burn_in >= traj.n_iters and traj.n_iters > 0:
        raise ValueError(f"burn_in {burn_in} must be < iterations {traj.n_iters}")
    rep = detect_stagnation(traj, particle, window_w)
    p = traj.pbest[-1, particle].copy()
    g = traj.nbest[-1, particle].copy()
    gap = float(np.linalg.norm(p - g))
    stagnant = rep.stagnant_since is not None
    window = (rep.stagnant_since if stagnant else traj.n_iters, traj.n_iters)
    if stagnant and rep.stagnant_since <= burn_in and gap > delta_osc:
        return RegimeLabel(KIND_OSCILLATORY, p, g, window)
    if stagnant and gap <= delta_conv:
        if belated_ids is not None and particle in belated_ids:
            return RegimeLabel(KIND_BELATED, p, g, window)
        return RegimeLabel(KIND_CONVERGING, p, g, window)
    return RegimeLabel(KIND_UNCLASSIFIED, p, g, window)


def flag_belated(log_dists, threshold_z: float = THRESHOLD_Z) -> set:
    """Flag particles whose fixed-step log-distance is a robust upper outlier.

    log_dists maps particle id to log||x_n - g|| (a dict, or an array indexed
    by id). The z-score uses median and MAD scaled by 1.4826; belated means
    lagging, so only the upper tail is flagged. MAD = 0 (no variability)
    flags nothing. Adding a constant to every value leaves the result
    unchanged.
    """
    if isinstance(log_dists, dict):
        ids = list(log_dists.keys())
        vals = np.array([log_dists[i] for i in ids], dtype=float)
    else:
        vals = np.asarray(log_dists, dtype=float)
        ids = list(range(len(vals)))
    if len(vals) < 5:
        raise ValueError("flag_belated needs at least 5 particles")
    finite = np.isfinite(vals)
    if not finite.any():
        return set()
    med = np.median(vals[finite])
    mad = 1.4826 * np.median(np.abs(vals[finite] - med))
    if mad == 0.0:
        return set()
    z = (vals - med) / mad
    return {ids[i] for i in np.flatnonzero(z > threshold_z)}


def label_to_dict(particle: int, label: RegimeLabel, stagnant_since) -> dict:
    """JSON-ready classification record: {particle, kind, p, g, stagnant_since}."""
    return {
        "particle": int(particle),
        "kind": label.kind,
        "p": [float(v) for v in label.attractor_p],
        "g": [float(v) for v in label.attractor_g],
        "stagnant_since": None if stagnant_since is None else int(stagnant_since),
    }
