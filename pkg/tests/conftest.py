"""Shared fixtures: one small deterministic run reused across test modules."""

import pytest

from swarmclt import PsoParams, TopologySpec, lookup, run

# classical calibration used throughout the statistical tests
OMEGA = 0.72984
C = 1.496172


def make_params(**overrides):
    base = dict(
        omega=OMEGA, c=C, swarm_size=30, iterations=120, dim=2,
        domain=((-10.0, 10.0), (-10.0, 10.0)),
        topology=TopologySpec(kind="ring", ring_k=1),
        seed=7,
    )
    base.update(overrides)
    return PsoParams(**base)


@pytest.fixture(scope="session")
def himmelblau_fn():
    return lookup("himmelblau")


@pytest.fixture(scope="session")
def small_traj(himmelblau_fn):
    """30 particles, 120 iterations, seed 7. Cheap and fully deterministic."""
    return run(make_params(), himmelblau_fn, run_id="small-7")


@pytest.fixture(scope="session")
def long_traj(himmelblau_fn):
    """Bigger run with converging particles, for regime and stats paths."""
    return run(make_params(swarm_size=100, iterations=400, seed=11), himmelblau_fn)
