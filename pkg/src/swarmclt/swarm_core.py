"""Particle swarm state machine with seeded, reproducible randomness.

Update rule (c1 = c2 = c, Hadamard products per coordinate):

    v_{n+1} = omega*v_n + c*r1 (.) (pbest - x_n) + c*r2 (.) (nbest - x_n)
    x_{n+1} = x_n + v_{n+1}

The swarm is stored as dense (S, d) arrays and advanced vectorized; one run is
sequential and deterministic given (params, seed). Positions are never clamped
to the domain box; an exit counter records particle-steps spent outside.
"""

from dataclasses import dataclass, field

import numpy as np

from .objectives import Objective


class ParamsError(ValueError):
    """Raised when PsoParams violates an invariant; message lists violations."""


class StepError(RuntimeError):
    """Raised when the objective returns a non-finite value during a step."""


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "ring"          # "global" or "ring"
    ring_k: int = 1             # neighbors on each side; ring includes self

    def validate(self, swarm_size: int) -> list:
        problems = []
        if self.kind not in ("global", "ring"):
            problems.append(f"topology.kind must be 'global' or 'ring', got {self.kind!r}")
        if self.kind == "ring":
            if self.ring_k < 1:
                problems.append("topology.ring_k must be >= 1")
            if 2 * self.ring_k + 1 > swarm_size:
                problems.append("topology requires 2*ring_k + 1 <= swarm_size")
        return problems


@dataclass(frozen=True)
class PsoParams:
    omega: float
    c: float
    swarm_size: int
    iterations: int
    dim: int = 2
    domain: tuple = ((-10.0, 10.0), (-10.0, 10.0))
    topology: TopologySpec = field(default_factory=TopologySpec)
    seed: int = 0
    velocity_init_factor: float = 0.5

    def validate(self) -> None:
        problems = []
        if not 0.0 < self.omega < 1.0:
            problems.append(f"omega must be in (0, 1), got {self.omega}")
        if not self.c > 0.0:
            problems.append(f"c must be > 0, got {self.c}")
        if self.swarm_size < 1:
            problems.append("swarm_size must be >= 1")
        if self.iterations < 0:
            problems.append("iterations must be >= 0")
        if self.dim < 1:
            problems.append("dim must be >= 1")
        if len(self.domain) != self.dim:
            problems.append(f"domain must have {self.dim} axes, got {len(self.domain)}")
        for k, (lo, hi) in enumerate(self.domain):
            if not lo < hi:
                problems.append(f"domain axis {k}: need lo < hi, got [{lo}, {hi}]")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must fit in 64 unsigned bits")
        problems += self.topology.validate(self.swarm_size)
        if problems:
            raise ParamsError("; ".join(problems))

    def domain_arrays(self):
        box = np.asarray(self.domain, dtype=float)
        return box[:, 0], box[:, 1]


@dataclass(frozen=True)
class NoiseDraw:
    """One step's uniform draws; eps/eta are the derived triangular noises."""
    r1: np.ndarray
    r2: np.ndarray

    @property
    def eps(self) -> np.ndarray:
        return self.r1 + self.r2 - 1.0

    @property
    def eta(self) -> np.ndarray:
        return self.r1 - self.r2


@dataclass
class SwarmState:
    x: np.ndarray               # (S, d) positions
    v: np.ndarray               # (S, d) velocities
    pbest: np.ndarray           # (S, d) personal bests
    pbest_val: np.ndarray       # (S,) f(pbest)
    nbest: np.ndarray           # (S, d) neighborhood bests
    nbest_val: np.ndarray       # (S,) f(nbest)
    fx: np.ndarray              # (S,) objective at x
    iter: int
    rng: np.random.Generator
    exit_count: int = 0         # cumulative particle-steps outside the domain


@dataclass
class Trajectory:
    """Dense per-iteration record of one run: iterations 0..N inclusive."""
    x: np.ndarray               # (N+1, S, d)
    v: np.ndarray               # (N+1, S, d)
    pbest: np.ndarray           # (N+1, S, d)
    nbest: np.ndarray           # (N+1, S, d)
    fx: np.ndarray              # (N+1, S) objective at x
    run_id: str
    objective: str
    params: PsoParams
    exit_count: int = 0

    @property
    def n_iters(self) -> int:
        return self.x.shape[0] - 1

    @property
    def swarm_size(self) -> int:
        return self.x.shape[1]

    @property
    def dim(self) -> int:
        return self.x.shape[2]

    @property
    def n_records(self) -> int:
        return self.x.shape[0] * self.x.shape[1]


def _eval_objective(f, x: np.ndarray) -> np.ndarray:
    fx = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = int(np.flatnonzero(~np.isfinite(fx))[0])
        raise StepError(f"objective returned non-finite value for particle {bad} at {x[bad].tolist()}")
    return fx


def _update_nbest(state: SwarmState, topology: TopologySpec) -> None:
    """Refresh neighborhood bests; only strict improvements replace incumbents."""
    S = state.pbest_val.shape[0]
    if topology.kind == "global":
        m = int(np.argmin(state.pbest_val))
        if state.pbest_val[m] < state.nbest_val[0]:
            state.nbest[:] = state.pbest[m]
            state.nbest_val[:] = state.pbest_val[m]
        return
    k = topology.ring_k
    offs = range(-k, k + 1)
    vals = np.stack([np.roll(state.pbest_val, -o) for o in offs])  # (2k+1, S)
    idx = np.argmin(vals, axis=0)
    best_val = vals[idx, np.arange(S)]
    upd = best_val < state.nbest_val
    if np.any(upd):
        offarr = np.array(list(offs))
        nb_idx = (np.arange(S) + offarr[idx]) % S
        state.nbest[upd] = state.pbest[nb_idx[upd]]
        state.nbest_val[upd] = best_val[upd]


def init_swarm(params: PsoParams, f: Objective) -> SwarmState:
    """Seeded init: x0 uniform on the domain box, v0 uniform on the scaled box.

    The velocity box is ±velocity_init_factor*(hi-lo) per axis. pbest starts at
    x0 and nbest is derived from the topology. Identical seeds give
    bit-identical states (counter-based generator keyed by the seed).
    """
    params.validate()
    rng = np.random.default_rng(np.random.Philox(key=params.seed))
    lo, hi = params.domain_arrays()
    S, d = params.swarm_size, params.dim
    x = rng.uniform(lo, hi, (S, d))
    vw = params.velocity_init_factor * (hi - lo)
    v = rng.uniform(-vw, vw, (S, d))
    fx = _eval_objective(f, x)
    state = SwarmState(
        x=x, v=v,
        pbest=x.copy(), pbest_val=fx.copy(),
        nbest=x.copy(), nbest_val=fx.copy(),
        fx=fx,
        iter=0, rng=rng,
    )
    _update_nbest(state, params.topology)
    return state


def step(state: SwarmState, params: PsoParams, f: Objective) -> SwarmState:
    """Advance the swarm one iteration in place and return it.

    Draw order is fixed (r1 then r2, each (S, d)) so trajectories are
    reproducible; pbest/nbest replace their incumbents only on strict
    improvement, so ties keep the older best.
    """
    S, d = state.x.shape
    r1 = state.rng.random((S, d))
    r2 = state.rng.random((S, d))
    state.v = params.omega * state.v \
        + params.c * r1 * (state.pbest - state.x) \
        + params.c * r2 * (state.nbest - state.x)
    state.x = state.x + state.v
    fx = _eval_objective(f, state.x)
    state.fx = fx
    imp = fx < state.pbest_val
    state.pbest[imp] = state.x[imp]
    state.pbest_val[imp] = fx[imp]
    _update_nbest(state, params.topology)
    lo, hi = params.domain_arrays()
    out = np.any((state.x < lo) | (state.x > hi), axis=1)
    state.exit_count += int(out.sum())
    state.iter += 1
    return state


def run(params: PsoParams, f: Objective, run_id: str = None) -> Trajectory:
    """Run init + N steps and record the full trajectory (iterations 0..N)."""
    state = init_swarm(params, f)
    N, S, d = params.iterations, params.swarm_size, params.dim
    X = np.empty((N + 1, S, d))
    V = np.empty((N + 1, S, d))
    P = np.empty((N + 1, S, d))
    G = np.empty((N + 1, S, d))
    FX = np.empty((N + 1, S))
    X[0], V[0], P[0], G[0], FX[0] = state.x, state.v, state.pbest, state.nbest, state.fx
    for n in range(1, N + 1):
        step(state, params, f)
        X[n], V[n], P[n], G[n], FX[n] = state.x, state.v, state.pbest, state.nbest, state.fx
    return Trajectory(
        x=X, v=V, pbest=P, nbest=G, fx=FX,
        run_id=run_id or f"{f.name}-s{params.seed}",
        objective=f.name,
        params=params,
        exit_count=state.exit_count,
    )


def single_line_form(x_n, x_prev, p, g, draw: NoiseDraw, params: PsoParams):
    """One-line recurrence equivalent to the velocity-form update.

    x_{n+1} = (1+w)x_n - w x_{n-1} + c(r1+r2)(.)( (p+g)/2 - x_n )
                                   + c(r1-r2)(.)( (p-g)/2 )

    Used only as a cross-check oracle against step(); requires v_n = x_n - x_{n-1}.
    """
    x_n = np.asarray(x_n, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    w, c = params.omega, params.c
    theta = (p + g) / 2.0
    half_diff = (p - g) / 2.0
    return (1.0 + w) * x_n - w * x_prev \
        + c * (draw.r1 + draw.r2) * (theta - x_n) \
        + c * (draw.r1 - draw.r2) * half_diff
