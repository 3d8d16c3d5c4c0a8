"""Objective registry and benchmark function values."""

import numpy as np
import pytest

from swarmclt import (
    DuplicateObjectiveError,
    Objective,
    UnknownObjectiveError,
    himmelblau,
    lookup,
    names,
    register,
)


def test_refined_optima_are_roots():
    obj = lookup("himmelblau")
    for p in obj.refined_optima:
        assert himmelblau(p) < 1e-12
    # the one rational optimum evaluates to exactly zero
    assert himmelblau(np.array([3.0, 2.0])) == 0.0


def test_known_optima_are_near_roots():
    # known_optima are the published rounded points; the function value there
    # is small but not zero (except at (3, 2), which is exact)
    obj = lookup("himmelblau")
    for point, value in obj.known_optima:
        assert value == 0.0
        assert himmelblau(point) < 1e-2


def test_himmelblau_has_four_distinct_optima():
    obj = lookup("himmelblau")
    pts = np.array([p for p, _ in obj.known_optima])
    assert pts.shape == (4, 2)
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.linalg.norm(pts[i] - pts[j]) > 1.0


def test_refined_match_known_to_rounding():
    obj = lookup("himmelblau")
    known = np.array([p for p, _ in obj.known_optima])
    refined = np.array(obj.refined_optima)
    assert refined.shape == known.shape
    assert np.max(np.abs(refined - known)) < 0.01


def test_vectorized_evaluation_shape():
    obj = lookup("himmelblau")
    x = np.random.default_rng(0).uniform(-5, 5, (17, 2))
    fx = obj(x)
    assert fx.shape == (17,)
    # agrees with the scalar helper row by row
    rows = np.array([himmelblau(x[i]) for i in range(17)])
    assert np.array_equal(fx, rows)


def test_himmelblau_nonnegative_on_grid():
    g = np.linspace(-6, 6, 61)
    xx, yy = np.meshgrid(g, g)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    obj = lookup("himmelblau")
    assert np.all(obj(pts) >= 0.0)


def test_lookup_unknown_is_keyerror():
    with pytest.raises(UnknownObjectiveError) as ei:
        lookup("not-a-function")
    assert isinstance(ei.value, KeyError)
    assert "not-a-function" in str(ei.value)


def test_names_contains_builtins():
    got = names()
    assert "himmelblau" in got
    assert "sphere" in got
    assert got == sorted(got)


def test_register_and_duplicate():
    def sphere3(x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1)

    obj = Objective(
        name="test-sphere-3d", dim=3, fn=sphere3,
        known_optima=(((0.0, 0.0, 0.0), 0.0),),
        refined_optima=((0.0, 0.0, 0.0),),
        default_domain=((-5.0, 5.0),) * 3,
    )
    register(obj)
    assert lookup("test-sphere-3d").dim == 3
    with pytest.raises(DuplicateObjectiveError):
        register(obj)


def test_default_domain_is_per_axis():
    obj = lookup("himmelblau")
    assert len(obj.default_domain) == obj.dim
    for lo, hi in obj.default_domain:
        assert lo < hi
