import cmath
import io
import math

import numpy as np
import pytest

from newton_basins.curve import (
    BudgetReached,
    CriticalHit,
    CurveTolerances,
    EscapedToInfinity,
    NearCritical,
    SeedCurve,
    SeedInvalid,
    extend_curve,
    pull_back_point,
    read_curve_csv,
    read_seed_csv,
    straight_seed,
    write_curve_csv,
)
from newton_basins.function import FamilyExpZn, newton_step
from newton_basins.grid import GridSpec, immediate_basin, rasterize


def larger_preimage(c):
    # (w^2 + 1) / (2w) = c  <=>  w^2 - 2cw + 1 = 0
    return c + math.sqrt(c * c - 1)


def test_pull_back_examples():
    assert abs(pull_back_point("z^2-1", 1.25, 2.01) - 2) <= 1e-10
    assert abs(pull_back_point("exp(z)", 5, 6.3) - 6) <= 1e-12
    with pytest.raises(NearCritical):
        pull_back_point("z^2-1", 1.0, 1 + 1e-10)


def test_quadratic_extension_matches_backward_orbit():
    ext = extend_curve("z^2-1", straight_seed("z^2-1", 3.0), 10)
    assert isinstance(ext.outcome, BudgetReached)
    assert ext.t_max == 10
    assert np.all(np.abs(ext.points.imag) < 1e-9)
    expected = 3.0
    for t in range(2, 11):
        expected = larger_preimage(expected)
        assert abs(ext.point_at(t) - expected) <= 1e-8 * expected
    ints = [ext.point_at(t).real for t in range(1, 11)]
    assert np.all(np.diff(ints) > 0)


def test_exp_extension_is_translation():
    ext = extend_curve("exp(z)", straight_seed("exp(z)", 0.5 + 0.25j), 6)
    assert isinstance(ext.outcome, BudgetReached)
    for t in range(1, 7):
        assert abs(ext.point_at(t) - (0.5 + 0.25j + t - 1)) <= 1e-9
    assert np.all(ext.functional_residuals("exp(z)") <= 1e-10)


def test_family_curve_stays_in_basin_and_grows():
    n = 5
    f = FamilyExpZn(n)
    start = 1.3 * cmath.exp(1j * math.pi / n)
    ext = extend_curve(f, straight_seed(f, start, 9), 12)
    assert isinstance(ext.outcome, BudgetReached)
    spec = GridSpec.square(4.0, 257)
    grid = rasterize(f, spec)
    mask = immediate_basin(grid, 0j)
    inside = [z for z in ext.points if abs(z.real) < 3.9 and abs(z.imag) < 3.9]
    rows, cols = spec.pixel_of(np.array(inside))
    assert np.mean(mask[rows, cols]) > 0.95
    mods = [abs(ext.point_at(t)) for t in range(5, 13)]
    assert np.all(np.diff(mods) > 0)


def test_critical_hit():
    ext = extend_curve("z^2-1", straight_seed("z^2-1", 0.6), 5)
    assert isinstance(ext.outcome, CriticalHit)
    assert abs(ext.outcome.point - 1) < 0.01
    assert 1 <= ext.t_max < 5


def test_escape_to_infinity():
    ext = extend_curve("z^2-1", straight_seed("z^2-1", 3.0), 30)
    assert isinstance(ext.outcome, EscapedToInfinity)
    assert ext.t_max < 30
    assert np.isfinite(ext.outcome.asymptotic_value)


def test_seed_validation():
    with pytest.raises(SeedInvalid, match="closure"):
        SeedCurve([0, 1], [1.0, 3.0]).validate("z^2-1")
    # samples through the critical point 1 of the Newton map
    start = newton_step("z^2-1", 0.8).real
    seed = SeedCurve([0, (1 - start) / (0.8 - start), 1], [start, 1.0, 0.8])
    with pytest.raises(SeedInvalid, match="critical"):
        extend_curve("z^2-1", seed, 3)
    with pytest.raises(SeedInvalid):
        SeedCurve([0.0], [1.0])


@pytest.mark.parametrize("fun", ["z^2-1", "exp(z)", FamilyExpZn(3)], ids=str)
def test_step_halving_agrees(fun):
    end = {"z^2-1": 2.5, "exp(z)": 1j}.get(fun, 1.4 * cmath.exp(1j * math.pi / 3))
    seed = straight_seed(fun, end, 5)
    coarse = extend_curve(fun, seed, 4)
    fine = extend_curve(fun, seed, 4, CurveTolerances(initial_step=1 / 128))
    for t in np.arange(1, 4 + 1e-9, 0.25):
        assert abs(coarse.point_at(t) - fine.point_at(t)) <= 1e-8 * (1 + abs(fine.point_at(t)))


def test_functional_equation_holds():
    ext = extend_curve("sin(z)", straight_seed("sin(z)", 1.2), 5)
    res = ext.functional_residuals("sin(z)")
    assert res.size > 0 and res.max() <= 1e-10
    for t, z in zip(ext.t, ext.points):
        if t >= 1:
            assert abs(newton_step("sin(z)", z) - ext.point_at(t - 1)) <= 1e-10 * (1 + abs(z))


def test_csv_round_trip():
    ext = extend_curve("z^2-1", straight_seed("z^2-1", 3.0), 3)
    buf = io.StringIO()
    write_curve_csv(buf, ext)
    buf.seek(0)
    curve, footer = read_curve_csv(buf)
    assert np.array_equal(curve.t, ext.t) and np.array_equal(curve.points, ext.points)
    assert footer["outcome"] == "BudgetReached" and footer["t_max"] == 3
    with pytest.raises(SeedInvalid, match="line 2"):
        read_seed_csv(io.StringIO("t,re,im\n0,1\n"))
