import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newton_basins.function import FamilyExpZn, eval_jet, newton_step
from newton_basins.orbit import (
    ESCAPE,
    INDETERMINATE,
    POLE,
    ROOT,
    NotARoot,
    RootEntry,
    RootRegistry,
    Tolerances,
    circular_clusters,
    circular_mean,
    circular_std,
    classify_escape_direction,
    iterate_orbit,
    register_root,
    run_orbits,
)


def angle_gap(a, b):
    return abs(cmath.phase(cmath.exp(1j * (a - b))))


def test_quadratic_root_from_two():
    reg = RootRegistry()
    res = iterate_orbit("z^2-1", 2, registry=reg)
    assert res.kind == ROOT and res.iterations_used <= 8
    assert abs(reg[res.root_id].position - 1) < 1e-12


def test_hand_iterates_of_quadratic():
    # (z^2+1)/(2z): 2 -> 1.25 -> 1.025 -> 1.0003...
    res = iterate_orbit("z^2-1", 2, budget=3, trace=True)
    assert np.allclose(res.trace[:4], [2, 1.25, 1.025, 1.0003048780487804])


def test_exp_escapes_along_negative_axis():
    res = iterate_orbit("exp(z)", 0)
    assert res.kind == ESCAPE
    assert angle_gap(res.direction, math.pi) < 1e-12


def test_family_superattracting_root():
    res = iterate_orbit(FamilyExpZn(5), 0.1)
    assert res.kind == ROOT
    assert abs(res.final_point) < 1e-6


@pytest.mark.parametrize("k", range(5))
def test_family_petal_directions(k):
    # small seeds of zeta - zeta^6 along attracting directions; z = 1/zeta
    zeta = 0.3 * cmath.exp(2j * math.pi * k / 5) * cmath.exp(0.05j)
    res = iterate_orbit(FamilyExpZn(5), 1 / zeta, budget=4096)
    assert res.kind == ESCAPE and res.direction is not None
    # arg z = -arg zeta
    assert angle_gap(res.direction, -2 * math.pi * k / 5) < Tolerances().direction_epsilon


def test_pole_hit():
    res = iterate_orbit("z^2+1", 0)
    assert res.kind == POLE and res.final_point == 0


def test_budget_exhaustion_is_indeterminate():
    # the imaginary axis is invariant and chaotic for z^2 - 1
    res = iterate_orbit("z^2-1", 0.7j, budget=5)
    assert res.kind == INDETERMINATE and res.iterations_used == 5


def test_register_root_examples():
    reg = RootRegistry([RootEntry(0, 0j, 0.0), RootEntry(1, 1 + 0j, 0.0)])
    assert register_root(reg, 1 + 1e-9, "z^2-1") == 1
    reg = RootRegistry()
    rid = register_root(reg, -0.9999998, "z^2-1")
    assert abs(reg[rid].position + 1) < 1e-12
    assert reg[rid].residual <= 1e-12
    with pytest.raises(NotARoot):
        register_root(RootRegistry(), 0.5, "z^2-1")


def test_escape_direction_classifier():
    tail = -np.arange(1e6, 1e6 + 20)
    assert angle_gap(classify_escape_direction(tail), math.pi) < 1e-12
    spread = 2e6 * np.exp(1j * np.linspace(0, 2.0, 20))
    assert classify_escape_direction(spread) is None
    assert classify_escape_direction(tail[:5]) is None


def test_circular_statistics():
    assert angle_gap(circular_mean([2 * math.pi - 0.1, 0.1]), 0.0) < 1e-12
    assert circular_std([1.0, 1.0, 1.0]) < 1e-7
    groups = circular_clusters([6.2, 0.05, 3.1, 3.2], 0.2)
    assert sorted(len(g) for g in groups) == [2, 2]


def test_batch_matches_single_orbits():
    rng = np.random.default_rng(3)
    z0 = rng.uniform(-2, 2, 40) + 1j * rng.uniform(-2, 2, 40)
    batch = run_orbits("z^3-1", z0)
    for k, z in enumerate(z0):
        single = run_orbits("z^3-1", np.array([z]))
        assert single.kind[0] == batch.kind[k]
        assert single.final[0] == batch.final[k]
        assert single.iterations[0] == batch.iterations[k]


def test_root_capture_precedes_slow_escape_rule():
    # parabolic drift far out must not be mistaken for a root
    batch = run_orbits(FamilyExpZn(5), np.array([130.0 * cmath.exp(0.01j)]), 512)
    assert batch.kind[0] != ROOT


@settings(max_examples=60, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_root_invariants(z0):
    reg = RootRegistry()
    res = iterate_orbit("z^3-1", z0, registry=reg)
    if res.kind == ROOT:
        xi = reg[res.root_id].position
        assert abs(res.final_point - xi) <= Tolerances().root_capture_radius
        assert abs(eval_jet("z^3-1", xi).value) <= 1e-10 * (1 + abs(xi))
        assert abs(newton_step("z^3-1", xi) - xi) <= 1e-9
        # the next iterate is at least as close
        assert abs(newton_step("z^3-1", res.final_point) - xi) <= abs(res.final_point - xi) + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False))
def test_escape_monotonicity_witness(z0):
    tol = Tolerances()
    res = iterate_orbit(FamilyExpZn(3), z0, budget=2048, trace=True)
    if res.kind == ESCAPE and res.direction is not None:
        mods = np.abs(res.trace[-tol.direction_window:])
        assert np.all(np.diff(mods) > 0)
        args = np.angle(res.trace[-tol.direction_window:])
        assert all(angle_gap(a, res.direction) < tol.direction_epsilon for a in args)


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False))
def test_budget_monotonicity(z0):
    small = run_orbits(FamilyExpZn(3), np.array([z0]), 64)
    large = run_orbits(FamilyExpZn(3), np.array([z0]), 1024)
    if small.kind[0] in (ROOT, ESCAPE):
        assert large.kind[0] == small.kind[0]
        assert large.final[0] == small.final[0]


def test_determinism():
    z0 = np.linspace(-2, 2, 101) + 0.37j
    a = run_orbits(FamilyExpZn(5), z0)
    b = run_orbits(FamilyExpZn(5), z0[::-1])
    assert np.array_equal(a.kind, b.kind[::-1])
    assert np.array_equal(a.final, b.final[::-1])


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        Tolerances(root_capture_radius=0)
    with pytest.raises(ValueError):
        Tolerances(direction_epsilon=-0.2)


def test_orbit_starting_on_a_root_is_captured():
    res = iterate_orbit("z^2-1", 1.0)
    assert res.kind == ROOT and res.final_point == 1
