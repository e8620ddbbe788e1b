import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newton_basins import grid as gridmod
from newton_basins.function import FamilyExpZn
from newton_basins.grid import (
    LABEL_INDETERMINATE,
    BasinGrid,
    GridSpec,
    HalfPlane,
    NoInvariantDisk,
    RootOutsideGrid,
    Sector,
    build_exhaustion,
    check_unbounded,
    confirmed_holes,
    detect_holes,
    escape_label,
    exhaustion_ratio,
    immediate_basin,
    invariant_disk,
    rasterize,
    touches_boundary,
    verify_absorbing,
    virtual_basin,
)
from newton_basins.orbit import ESCAPE, INDETERMINATE, ROOT, RootEntry, RootRegistry, run_orbits


def flood_fill_holes(mask):
    """Bounded 8-connected complement components, by BFS from the boundary."""
    rows, cols = mask.shape
    comp = ~mask
    outside = np.zeros_like(comp)
    queue = deque()
    for r in range(rows):
        for c in range(cols):
            if comp[r, c] and (r in (0, rows - 1) or c in (0, cols - 1)):
                outside[r, c] = True
                queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and comp[rr, cc] and not outside[rr, cc]:
                    outside[rr, cc] = True
                    queue.append((rr, cc))
    inner = comp & ~outside
    seen = np.zeros_like(inner)
    count = 0
    for r in range(rows):
        for c in range(cols):
            if inner[r, c] and not seen[r, c]:
                count += 1
                seen[r, c] = True
                queue.append((r, c))
                while queue:
                    a, b = queue.popleft()
                    for dr in (-1, 0, 1):
                        for dc in (-1, 0, 1):
                            aa, bb = a + dr, b + dc
                            if 0 <= aa < rows and 0 <= bb < cols and inner[aa, bb] and not seen[aa, bb]:
                                seen[aa, bb] = True
                                queue.append((aa, bb))
    return count


def annulus(n=32, r_in=5, r_out=10):
    y, x = np.mgrid[:n, :n] - (n - 1) / 2
    d = np.hypot(x, y)
    return (d >= r_in) & (d <= r_out)


def synthetic_grid(labels, spec=None, roots=(0j,)):
    labels = np.asarray(labels, dtype=np.int32)
    spec = spec or GridSpec.square(2.0, labels.shape[0])
    kind = np.where(labels >= 0, ROOT, INDETERMINATE).astype(np.int8)
    reg = RootRegistry([RootEntry(i, complex(p), 0.0) for i, p in enumerate(roots)])
    z = np.zeros(labels.shape, dtype=np.complex128)
    return BasinGrid(spec, labels, kind, z, np.full(labels.shape, np.nan), np.zeros(labels.shape, np.int32), reg)


# ---------------------------------------------------------------- geometry


def test_pixel_centers_and_lookup():
    spec = GridSpec(1 + 1j, 4.0, 2.0, 4, 3)
    assert np.allclose(spec.xs(), [-0.5, 0.5, 1.5, 2.5])
    assert np.allclose(spec.ys(), [1 + 2 / 3, 1.0, 1 - 2 / 3])
    pts = spec.points()
    row, col = spec.pixel_of(pts)
    assert np.array_equal(row, np.repeat(np.arange(3), 4).reshape(3, 4))
    assert np.array_equal(col, np.tile(np.arange(4), 3).reshape(3, 4))
    assert spec.pixel_of(100j)[0] == -1


def test_odd_grid_has_real_axis_row():
    spec = GridSpec.square(2.0, 257)
    assert spec.ys()[128] == 0.0


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(0j, 1.0, 1.0, 1, 5)
    with pytest.raises(ValueError):
        GridSpec(0j, -1.0, 1.0, 5, 5)


# ---------------------------------------------------------------- rasterization


def test_quadratic_raster_is_antisymmetric():
    g = rasterize("z^2-1", GridSpec.square(2.0, 64))
    assert len(g.registry) == 2
    # z -> -z swaps the roots and reverses both pixel axes
    lab = g.labels
    swapped = np.where(lab >= 0, 1 - lab, lab)
    assert np.array_equal(lab, swapped[::-1, ::-1])
    xs = g.spec.xs()
    right = lab[:, xs > 0]
    assert np.all((right == 1) | (right == LABEL_INDETERMINATE))


def test_exp_raster_escapes_everywhere():
    g = rasterize("exp(z)", GridSpec.square(2.0, 64))
    assert np.all(g.kind == ESCAPE)
    assert len(g.cluster_directions) == 1
    assert abs(g.cluster_directions[0] - math.pi) < 1e-9
    assert np.all(g.labels == escape_label(0))


def test_family_raster_clusters():
    g = rasterize(FamilyExpZn(5), GridSpec.square(2.0, 128))
    assert len(g.registry) == 1 and abs(g.registry[0].position) < 1e-9
    assert len(g.cluster_directions) == 5
    for k, d in enumerate(g.cluster_directions):
        expected = 2 * math.pi * ((k + 1) % 5) / 5
        assert abs(np.angle(np.exp(1j * (d - expected)))) < 0.1


def test_raster_matches_orbit_engine():
    spec = GridSpec.square(2.0, 32)
    g = rasterize("z^3-1", spec)
    batch = run_orbits("z^3-1", spec.points())
    assert np.array_equal(g.kind, batch.kind)


def test_raster_worker_independence():
    spec = GridSpec.square(2.0, 48)
    a = rasterize(FamilyExpZn(3), spec, workers=1)
    b = rasterize(FamilyExpZn(3), spec, workers=3)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.final, b.final)


def test_components_partition():
    g = rasterize("z^3-1", GridSpec.square(2.0, 40))
    comp = g.components
    assert comp.min() >= 1
    # neighbours with equal labels share a component id, others do not
    same = g.labels[:, 1:] == g.labels[:, :-1]
    assert np.array_equal(comp[:, 1:] == comp[:, :-1], same)
    same = g.labels[1:] == g.labels[:-1]
    assert np.array_equal(comp[1:] == comp[:-1], same)


# ---------------------------------------------------------------- basins and holes


def test_immediate_basin_of_quadratic_is_right_half():
    g = rasterize("z^2-1", GridSpec.square(2.0, 65))
    rid, _ = g.registry.nearest(1)
    mask = immediate_basin(g, rid)
    xs = g.spec.xs()
    assert np.all(mask[:, xs > 0.05])
    assert not np.any(mask[:, xs < 0])


def test_immediate_basin_without_roots():
    g = rasterize("exp(z)", GridSpec.square(2.0, 16))
    with pytest.raises(RootOutsideGrid):
        immediate_basin(g, 0)


def test_family_basin_rotational_symmetry():
    spec = GridSpec.square(2.0, 255)
    g = rasterize(FamilyExpZn(5), spec)
    mask = immediate_basin(g, 0j)
    pts = spec.points()[mask]
    row, col = spec.pixel_of(pts * np.exp(2j * math.pi / 5))
    inside = row >= 0
    mismatch = np.count_nonzero(~mask[row[inside], col[inside]])
    # quantization along the fractal boundary; measured against the grid
    assert mismatch < 0.01 * mask.size


def test_holes_fixtures():
    assert detect_holes(np.ones((16, 16), bool)) == []
    holes = detect_holes(annulus())
    assert len(holes) == 1 and not holes[0].touches_boundary
    # a hole made only of ignored pixels is not reported
    ring = annulus()
    assert detect_holes(ring, ignore=~ring) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=0.3, max_value=0.8))
def test_hole_count_matches_flood_fill(seed, density):
    mask = np.random.default_rng(seed).random((32, 32)) < density
    assert len(detect_holes(mask)) == flood_fill_holes(mask)


def test_diagonal_convention():
    # a diagonal chain of mask pixels does not enclose anything
    mask = np.eye(8, dtype=bool)
    assert detect_holes(mask) == []
    # a 4-connected ring encloses one pixel; an 8-only ring leaks
    ring = np.zeros((5, 5), bool)
    ring[1, 1:4] = ring[3, 1:4] = ring[1:4, 1] = ring[1:4, 3] = True
    assert len(detect_holes(ring)) == 1
    diamond = np.zeros((5, 5), bool)
    diamond[[0, 1, 1, 2, 2, 3, 3, 4], [2, 1, 3, 0, 4, 1, 3, 2]] = True
    assert detect_holes(diamond) == []


def test_cubic_basins_have_no_holes_flood_fill():
    g = rasterize("z^3-1", GridSpec.square(2.0, 128))
    for r in g.registry.roots:
        mask = immediate_basin(g, r.root_id)
        assert flood_fill_holes(mask) == 0
        found, confirmed = confirmed_holes("z^3-1", g.spec, ("root", r.position), grid=g)
        assert confirmed == []


def test_confirmation_drops_holes_absent_at_double_resolution(monkeypatch):
    spec = GridSpec.square(2.0, 32)
    holey = np.zeros((32, 32), np.int32)
    holey[14:18, 14:18] = 1
    fine = np.zeros((64, 64), np.int32)
    calls = []

    def fake_rasterize(fun, s, *args, **kwargs):
        calls.append(s)
        return synthetic_grid(fine, s, roots=(1.5 + 1.5j,))

    monkeypatch.setattr(gridmod, "rasterize", fake_rasterize)
    base = synthetic_grid(holey, spec, roots=(1.5 + 1.5j,))
    found, confirmed = confirmed_holes("z", spec, ("root", 1.5 + 1.5j), grid=base)
    assert len(found) == 1 and confirmed == []
    assert calls[0].columns == 64
    fine[28:36, 28:36] = 1
    found, confirmed = confirmed_holes("z", spec, ("root", 1.5 + 1.5j), grid=base)
    assert len(confirmed) == 1


# ---------------------------------------------------------------- unboundedness


def test_unbounded_quadratic():
    rounds = check_unbounded("z^2-1", 1 + 0j, GridSpec.square(2.0, 65))
    assert [r.touches_boundary for r in rounds] == [True, True]
    assert [r.spec.width for r in rounds] == [8.0, 16.0]


def test_unbounded_sine_root_zero():
    rounds = check_unbounded("sin(z)", 0j, GridSpec.square(2.0, 65))
    assert all(r.touches_boundary for r in rounds)


def test_unbounded_negative_control(monkeypatch):
    def clipped(fun, spec, *args, **kwargs):
        lab = np.full(spec.shape, LABEL_INDETERMINATE, np.int32)
        c = spec.shape[0] // 2
        lab[c - 3:c + 4, c - 3:c + 4] = 0
        return synthetic_grid(lab, spec)

    monkeypatch.setattr(gridmod, "rasterize", clipped)
    rounds = check_unbounded("z", 0j, GridSpec.square(2.0, 33))
    assert not any(r.touches_boundary for r in rounds)
    assert not touches_boundary(np.pad(np.ones((3, 3), bool), 2))


# ---------------------------------------------------------------- exhaustion


def test_invariant_disk_maps_inside():
    spec = GridSpec.square(2.0, 128)
    rho = invariant_disk("z^2-1", 1 + 0j, spec)
    theta = np.linspace(0, 2 * math.pi, 200)
    img = run_orbits("z^2-1", 1 + rho * np.exp(1j * theta), budget=1).final
    assert np.all(np.abs(img - 1) < rho)


def test_no_invariant_disk_on_coarse_grid():
    # two pixels already reach where exp(-z) dominates the Newton map
    with pytest.raises(NoInvariantDisk):
        invariant_disk("exp(z) - 1", 0j, GridSpec.square(50.0, 8))


def test_exhaustion_nesting_and_convergence():
    spec = GridSpec.square(2.0, 128)
    g = rasterize("z^2-1", spec)
    levels = build_exhaustion("z^2-1", 1 + 0j, spec, 12)
    assert levels[0].mask[spec.pixel_of(1)[0], spec.pixel_of(1)[1]]
    for a, b in zip(levels, levels[1:]):
        assert np.all(b.mask[a.mask])
    basin = immediate_basin(g, 1 + 0j)
    ratios = [exhaustion_ratio(lv.mask, basin) for lv in levels]
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.1


def test_exhaustion_family_sizes_nondecreasing():
    spec = GridSpec.square(2.0, 96)
    sizes = [int(lv.mask.sum()) for lv in build_exhaustion(FamilyExpZn(5), 0j, spec, 8)]
    assert sizes == sorted(sizes) and sizes[-1] > sizes[0]


# ---------------------------------------------------------------- absorbing sets


def test_absorbing_half_plane_for_exp():
    rep = verify_absorbing("exp(z)", HalfPlane(0.0, -1.0))
    assert rep.passed
    assert rep.worst_margin >= 1 - 1e-12
    assert rep.seeds.size == 64


def test_absorbing_fails_for_wrong_half_plane():
    rep = verify_absorbing("exp(z)", HalfPlane(math.pi, -1.0))  # Re z > 1
    assert not rep.boundary_pass and rep.worst_margin < 0


def test_absorbing_family_sector():
    rep = verify_absorbing(FamilyExpZn(5), Sector(0.0, 0.5, 3.0), budget=2048)
    assert rep.passed


def test_virtual_basin_walks_inward():
    g = rasterize(FamilyExpZn(3), GridSpec.square(2.0, 64))
    for k in range(len(g.cluster_directions)):
        mask = virtual_basin(g, k)
        assert mask.any() and touches_boundary(mask)
