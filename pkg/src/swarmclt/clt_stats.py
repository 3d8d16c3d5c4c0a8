"""Statistics for the three swarm limit theorems.

Covers: the admissibility predicates on (omega, c); the oscillatory-regime
constants, H1 statistic, per-coordinate intervals and ellipsoid; the
stagnation ratio chain with its mu_x / sigma_x^2 estimators, H2 statistic and
two-sided union region; and the cross-sectional H3 statistic with its
interval. All internal logarithms are natural.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .quantiles import chi2_quantile, normal_quantile
from .regime import THRESHOLD_Z, flag_belated

DISTANCE_FLOOR = 1e-12
LAG_T = 20


class ParameterRegimeError(ValueError):
    """Raised when (omega, c) violates the admissibility constraints."""


class SingularGammaError(ValueError):
    """Raised when a coordinate has p = g, making the ellipsoid degenerate."""


class InsufficientDataError(ValueError):
    """Raised when a usable analysis window is empty or too short."""


class BelowFloorError(ValueError):
    """Raised when a distance sits below the measurement floor."""


class DegenerateSampleError(ValueError):
    """Raised when a cross-sectional sample has zero spread."""


class A3Check(NamedTuple):
    ok: bool
    bound: float                # admissible c must satisfy 0 < c < bound


class B2Check(NamedTuple):
    ok: bool
    lower: float                # 1 + omega - c
    middle: float               # omega / c
    upper: float                # (1 + c) / 4


def check_A3(omega: float, c: float) -> A3Check:
    """Second-moment stability constraint: 0 < c < 12(1-omega^2)/(7-5*omega)."""
    if not -1.0 < omega < 1.0:
        raise ParameterRegimeError(f"omega must be in (-1, 1), got {omega}")
    bound = 12.0 * (1.0 - omega * omega) / (7.0 - 5.0 * omega)
    return A3Check(ok=(0.0 < c < bound), bound=bound)


def check_B2(omega: float, c: float) -> B2Check:
    """Stagnation-regime constraint 1+omega-c < omega/c < (1+c)/4.

    Also enforces the side conditions omega in (0,1) and c > 1 under which the
    stagnation limit theorem is stated.
    """
    if c == 0.0:
        raise ParameterRegimeError("c must be nonzero")
    lower = 1.0 + omega - c
    middle = omega / c
    upper = (1.0 + c) / 4.0
    ok = (lower < middle < upper) and (0.0 < omega < 1.0) and (c > 1.0)
    return B2Check(ok=ok, lower=lower, middle=middle, upper=upper)


def theorem1_constants(omega: float, c: float):
    """Closed-form (L, C) pair of the oscillatory central limit theorem.

    L = 2c((1-w)/(1+w))(1+w-c/2) - c^2/6 must be positive, which check_A3
    guarantees; C = (c/(12 L))((1-w)/(1+w))(1+w-c/2).
    """
    a3 = check_A3(omega, c)
    if not a3.ok:
        raise ParameterRegimeError(
            f"(omega={omega}, c={c}) outside the admissible region; need 0 < c < {a3.bound:.6f}")
    frac = (1.0 - omega) / (1.0 + omega)
    wing = 1.0 + omega - c / 2.0
    L = 2.0 * c * frac * wing - c * c / 6.0
    if L <= 0.0:
        raise ParameterRegimeError(f"variance constant L = {L} not positive")
    C = c / (12.0 * L) * frac * wing
    return L, C


def oscillatory_step_variance(omega: float, c: float) -> float:
    """Stationary per-step variance of the oscillation displacement.

    Returned as a multiple of (p_l - g_l)^2; the ratio C/H converts a windowed
    per-step standard deviation into the scale of the window-mean statistic,
    which is how pooled H1 samples are studentized.
    """
    L, _ = theorem1_constants(omega, c)
    return c * c / (24.0 * L)


@dataclass(frozen=True)
class OscillatoryCLT:
    L_const: float
    C_const: float
    gamma: np.ndarray           # diagonal entries C*(p-g)^2
    theta: np.ndarray           # (p+g)/2
    xbar: np.ndarray            # window mean of positions
    H1: np.ndarray              # sqrt(N_used)*(xbar - theta)
    N_used: int
    delta: np.ndarray           # p - g, kept for region construction
    warnings: tuple = ()


@dataclass
class NonOscCLT:
    """Ratio-chain view of one converging particle on a usable window."""
    ns: np.ndarray              # iteration indices of the window
    log_dist: np.ndarray        # log|x_n - g| over the window
    ratios: np.ndarray          # (x_k - g)/(x_{k-1} - g), consecutive k
    log_abs: np.ndarray         # log|ratios|
    regression_window: tuple    # (n_lo, n_hi)
    mu_x: float = None
    sigma2_x: float = None
    lag_T: int = LAG_T
    H2: float = None
    r_squared: float = None


@dataclass(frozen=True)
class SwarmCLT:
    n_fixed: int
    xbar_S: float
    sigma2_hat: float
    H3: float
    S_used: int
    filtered_ids: frozenset


@dataclass(frozen=True)
class ConfidenceRegion:
    """Interval, Ellipsoid, or TwoSidedUnion region with a membership test."""
    kind: str
    level: float
    payload: dict

    def contains(self, point) -> bool:
        if self.kind == "Interval":
            t = np.atleast_1d(np.asarray(point, dtype=float))
            bounds = self.payload["bounds"]
            if t.shape[0] != bounds.shape[0]:
                raise ValueError(f"point has dim {t.shape[0]}, region has {bounds.shape[0]}")
            return bool(np.all((bounds[:, 0] <= t) & (t <= bounds[:, 1])))
        if self.kind == "Ellipsoid":
            t = np.asarray(point, dtype=float)
            center = self.payload["center"]
            if t.shape != center.shape:
                raise ValueError(f"point has dim {t.shape}, region has {center.shape}")
            q = float(np.sum(self.payload["shape"] * (t - center) ** 2))
            return q <= self.payload["radius2"]
        if self.kind == "TwoSidedUnion":
            t = float(point)
            (lo1, hi1), (lo2, hi2) = self.payload["intervals"]
            return (lo1 <= t <= hi1) or (lo2 <= t <= hi2)
        raise ValueError(f"unknown region kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "level": self.level}
        for key, val in self.payload.items():
            out[key] = np.asarray(val).tolist() if isinstance(val, np.ndarray) else val
        return out


def h1_statistic(path: np.ndarray, p, g, omega: float, c: float) -> OscillatoryCLT:
    """Window-mean deviation statistic of one oscillating particle.

    path holds the particle's positions over the analysis window, shape (W, d).
    H1 = sqrt(W)(xbar - theta) with theta = (p+g)/2; the diagonal covariance is
    C*(p-g)^2 per coordinate. p = g in this regime makes the covariance
    degenerate, which is reported as a warning rather than an error.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        path = path[:, None]
    if path.shape[0] < 1:
        raise InsufficientDataError("h1_statistic needs at least one window row")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    L, C = theorem1_constants(omega, c)
    delta = p - g
    theta = (p + g) / 2.0
    W = path.shape[0]
    xbar = path.mean(axis=0)
    H1 = math.sqrt(W) * (xbar - theta)
    warnings = ()
    if np.all(delta == 0.0):
        warnings = ("degenerate covariance: p = g on every coordinate",)
    return OscillatoryCLT(
        L_const=L, C_const=C, gamma=C * delta ** 2, theta=theta,
        xbar=xbar, H1=H1, N_used=W, delta=delta, warnings=warnings,
    )


def ci_oscillatory(osc: OscillatoryCLT, alpha: float) -> ConfidenceRegion:
    """Per-coordinate interval: xbar_l +/- |p_l-g_l| sqrt(C/N) q_{1-alpha/2}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    q = normal_quantile(1.0 - alpha / 2.0)
    half = np.abs(osc.delta) * math.sqrt(osc.C_const / osc.N_used) * q
    bounds = np.stack([osc.xbar - half, osc.xbar + half], axis=1)
    return ConfidenceRegion(kind="Interval", level=1.0 - alpha, payload={"bounds": bounds})


def ellipsoid_oscillatory(osc: OscillatoryCLT, alpha: float) -> ConfidenceRegion:
    """Ellipsoidal region {t : (N/C) sum_l ((t_l-xbar_l)/(p_l-g_l))^2 <= chi2}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    zero = np.flatnonzero(osc.delta == 0.0)
    if zero.size:
        raise SingularGammaError(f"p and g coincide on coordinate {int(zero[0])}")
    d = osc.delta.shape[0]
    shape = osc.N_used / (osc.C_const * osc.delta ** 2)
    radius2 = chi2_quantile(1.0 - alpha, d)
    return ConfidenceRegion(
        kind="Ellipsoid", level=1.0 - alpha,
        payload={"center": osc.xbar.copy(), "shape": shape, "radius2": radius2},
    )


def _longest_usable_run(usable: np.ndarray) -> tuple:
    best = (0, -1)
    start = None
    for i, u in enumerate(usable):
        if u and start is None:
            start = i
        elif not u and start is not None:
            if i - start > best[1] - best[0] + 1:
                best = (start, i - 1)
            start = None
    if start is not None and len(usable) - start > best[1] - best[0] + 1:
        best = (start, len(usable) - 1)
    return best


def ratio_chain(xs: np.ndarray, g: float, floor: float = DISTANCE_FLOOR,
                window: tuple = None) -> NonOscCLT:
    """Successive-ratio view (x_k - g)/(x_{k-1} - g) on a usable window.

    Usable means |x_n - g| > floor. When no window is given, the longest
    contiguous usable run is used, so the telescoping identity
    sum log|ratios| = log|x_hi - g| - log|x_lo - g| holds exactly.
    """
    xs = np.asarray(xs, dtype=float)
    dist = np.abs(xs - g)
    usable = dist > floor
    if window is None:
        lo, hi = _longest_usable_run(usable)
    else:
        lo, hi = window
        if not (0 <= lo <= hi < len(xs)):
            raise InsufficientDataError(f"window {window} out of range for length {len(xs)}")
        if not usable[lo:hi + 1].all():
            raise InsufficientDataError("window contains below-floor distances")
    if hi - lo < 1:
        raise InsufficientDataError("no usable window with at least two points above the floor")
    y = xs[lo:hi + 1] - g
    ratios = y[1:] / y[:-1]
    return NonOscCLT(
        ns=np.arange(lo, hi + 1),
        log_dist=np.log(np.abs(y)),
        ratios=ratios,
        log_abs=np.log(np.abs(ratios)),
        regression_window=(lo, hi),
    )


def _ols(ns: np.ndarray, ys: np.ndarray):
    t = ns - ns.mean()
    den = float(np.sum(t * t))
    if den == 0.0:
        raise InsufficientDataError("regression window has a single abscissa")
    slope = float(np.sum(t * (ys - ys.mean())) / den)
    resid = ys - (ys.mean() + slope * t)
    sst = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0.0 else 1.0
    return slope, r2


@dataclass(frozen=True)
class MuSigmaEstimate:
    mu_x: float
    sigma2_x: float
    r_squared: tuple            # per-chain fit quality
    single_chain: bool
    floored: bool
    warnings: tuple = ()


def estimate_mu_sigma(chains, lag_T: int = LAG_T, bartlett: bool = False) -> MuSigmaEstimate:
    """Pooled decay rate and long-run variance of log-ratio chains.

    mu_x averages the per-chain least-squares slopes of log|x_n - g| against n.
    sigma2_x is the pooled variance of the log-ratios plus twice the truncated
    sum of lag-k autocovariances, k = 1..lag_T (unweighted by default; Bartlett
    weights behind the flag). A negative truncated sum is floored at the lag-0
    variance times 1e-6 with a warning.
    """
    chains = list(chains)
    if not chains:
        raise InsufficientDataError("no chains supplied")
    for ch in chains:
        if len(ch.log_abs) <= lag_T + 5:
            raise InsufficientDataError(
                f"chain on window {ch.regression_window} has {len(ch.log_abs)} ratios; "
                f"need more than lag_T + 5 = {lag_T + 5}")
    slopes, r2s = [], []
    for ch in chains:
        slope, r2 = _ols(ch.ns.astype(float), ch.log_dist)
        slopes.append(slope)
        r2s.append(r2)
    mu_x = float(np.mean(slopes))
    # pooled autocovariances: products within chains, centered per chain
    sq_sum = 0.0
    sq_cnt = 0
    cov_sums = np.zeros(lag_T)
    cov_cnts = np.zeros(lag_T, dtype=int)
    for ch in chains:
        resid = ch.log_abs - ch.log_abs.mean()
        sq_sum += float(np.sum(resid ** 2))
        sq_cnt += len(resid)
        for k in range(1, lag_T + 1):
            if len(resid) > k:
                cov_sums[k - 1] += float(np.sum(resid[:-k] * resid[k:]))
                cov_cnts[k - 1] += len(resid) - k
    gamma0 = sq_sum / sq_cnt
    gammas = np.where(cov_cnts > 0, cov_sums / np.maximum(cov_cnts, 1), 0.0)
    if bartlett:
        gammas = gammas * (1.0 - np.arange(1, lag_T + 1) / (lag_T + 1.0))
    sigma2 = gamma0 + 2.0 * float(np.sum(gammas))
    warnings = ()
    floored = False
    if sigma2 < 0.0:
        sigma2 = gamma0 * 1e-6
        floored = True
        warnings = ("truncated long-run variance was negative; floored at lag-0 variance * 1e-6",)
    return MuSigmaEstimate(
        mu_x=mu_x, sigma2_x=sigma2, r_squared=tuple(r2s),
        single_chain=(len(chains) < 2), floored=floored, warnings=warnings,
    )


def h2_statistic(x_N: float, g_N: float, N: int, mu_x: float,
                 floor: float = DISTANCE_FLOOR) -> float:
    """Rate-centered log-distance statistic (log|x_N - g_N| - N mu_x)/sqrt(N)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    dist = abs(x_N - g_N)
    if dist <= floor:
        raise BelowFloorError(
            f"|x_N - g_N| = {dist:.3e} is at the distance floor; evaluate at a smaller N")
    return (math.log(dist) - N * mu_x) / math.sqrt(N)


def region_nonoscillatory(x_n: float, n: int, mu_x: float, sigma_x: float,
                          alpha: float, form: str = "TheoremConsistent") -> ConfidenceRegion:
    """Two-sided union region around x_n for the stagnation attractor.

    TheoremConsistent uses radii exp(n mu_x -/+ sqrt(n) sigma_x q); PaperLiteral
    reproduces the printed exponents exp(mu_x -/+ sigma_x q / sqrt(n)) verbatim.
    The region is the union of the mirrored intervals x_n - [r_lo, r_hi] and
    x_n + [r_lo, r_hi], symmetric about x_n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if sigma_x < 0.0:
        raise ValueError(f"sigma_x must be >= 0, got {sigma_x}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    q = normal_quantile(1.0 - alpha / 2.0)
    if form == "TheoremConsistent":
        r_lo = math.exp(n * mu_x - math.sqrt(n) * sigma_x * q)
        r_hi = math.exp(n * mu_x + math.sqrt(n) * sigma_x * q)
    elif form == "PaperLiteral":
        r_lo = math.exp(mu_x - sigma_x * q / math.sqrt(n))
        r_hi = math.exp(mu_x + sigma_x * q / math.sqrt(n))
    else:
        raise ValueError(f"form must be 'TheoremConsistent' or 'PaperLiteral', got {form!r}")
    intervals = ((x_n - r_hi, x_n - r_lo), (x_n + r_lo, x_n + r_hi))
    return ConfidenceRegion(
        kind="TwoSidedUnion", level=1.0 - alpha,
        payload={"intervals": intervals, "form": form},
    )


def h3_and_ci(xs_at_n: np.ndarray, g_n: float, alpha: float, filter: bool = False,
              log_dists: np.ndarray = None, threshold_z: float = THRESHOLD_Z,
              keep_ids=None, n_fixed: int = -1):
    """Cross-sectional mean statistic and its interval at a fixed step.

    sigma2_hat = (1/S) sum (x_i - g_n)^2, H3 = sqrt(S) (xbar - g_n)/sigma_hat,
    interval xbar +/- (sigma_hat/sqrt(S)) q_{1-alpha/2}. With filter=True the
    sample is cleaned by flag_belated on log_dists (or log|x_i - g_n| when no
    vector distances are supplied); keep_ids short-circuits filtering when the
    caller already selected the sample.
    """
    xs = np.asarray(xs_at_n, dtype=float)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    S_all = len(xs)
    if keep_ids is not None:
        filtered = frozenset(range(S_all)) - frozenset(keep_ids)
    elif filter:
        ld = np.asarray(log_dists, dtype=float) if log_dists is not None \
            else np.log(np.abs(xs - g_n))
        filtered = frozenset(flag_belated(ld, threshold_z))
    else:
        filtered = frozenset()
    kept = np.array(sorted(set(range(S_all)) - filtered), dtype=int)
    S = len(kept)
    if S < 2:
        raise InsufficientDataError(f"need at least 2 particles after filtering, have {S}")
    dev = xs[kept] - g_n
    sigma2 = float(np.mean(dev ** 2))
    if sigma2 == 0.0:
        raise DegenerateSampleError("all particles sit exactly at g_n")
    sigma = math.sqrt(sigma2)
    xbar = float(np.mean(xs[kept]))
    H3 = math.sqrt(S) * (xbar - g_n) / sigma
    q = normal_quantile(1.0 - alpha / 2.0)
    half = sigma / math.sqrt(S) * q
    region = ConfidenceRegion(
        kind="Interval", level=1.0 - alpha,
        payload={"bounds": np.array([[xbar - half, xbar + half]])},
    )
    clt = SwarmCLT(n_fixed=n_fixed, xbar_S=xbar, sigma2_hat=sigma2, H3=H3,
                   S_used=S, filtered_ids=filtered)
    return clt, region


def constraint_grid(n: int, omega_range=(0.0, 1.0), c_range=(0.0, 3.0)):
    """Admissibility flags on an n-by-n grid of cell centers.

    Yields (omega, c, a3_ok, b2_ok) rows; cell centers avoid the singular
    edges omega = 1 and c = 0.
    """
    if n < 1:
        raise ValueError("grid size must be >= 1")
    w_lo, w_hi = omega_range
    c_lo, c_hi = c_range
    for i in range(n):
        omega = w_lo + (w_hi - w_lo) * (i + 0.5) / n
        for j in range(n):
            c = c_lo + (c_hi - c_lo) * (j + 0.5) / n
            a3 = check_A3(omega, c).ok
            b2 = check_B2(omega, c).ok
            yield omega, c, a3, b2
