"""Basin rasters: classification grids, immediate basins, holes, exhaustion.

Pixel ``(row, col)`` samples the complex point at its center::

    x = center.real + (2*col + 1 - columns) * width  / (2*columns)
    y = center.imag + (rows - 1 - 2*row)    * height / (2*rows)

so row 0 is the top edge and, for odd sizes, the middle row/column lies
exactly on the horizontal/vertical line through ``center``.

Masks are 4-connected, their complements 8-connected.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .function import EntireFunction, _as_function, newton_map_array
from .orbit import (
    DEFAULT_BUDGET,
    ESCAPE,
    INDETERMINATE,
    POLE,
    ROOT,
    NotARoot,
    RootRegistry,
    Tolerances,
    circular_clusters,
    circular_mean,
    register_root,
    run_orbits,
)

__all__ = [
    "GridSpec",
    "BasinGrid",
    "HoleComponent",
    "ExhaustionLevel",
    "RootOutsideGrid",
    "NoInvariantDisk",
    "LABEL_INDETERMINATE",
    "LABEL_POLE",
    "LABEL_ESCAPE_UNCLUSTERED",
    "escape_label",
    "rasterize",
    "immediate_basin",
    "virtual_basin",
    "detect_holes",
    "confirmed_holes",
    "check_unbounded",
    "build_exhaustion",
    "exhaustion_ratio",
    "HalfPlane",
    "Sector",
    "verify_absorbing",
]

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)

LABEL_INDETERMINATE = -1
LABEL_POLE = -2
LABEL_ESCAPE_UNCLUSTERED = -3
_ESCAPE_BASE = -10
TILE_ROWS = 16


def escape_label(cluster: int) -> int:
    return _ESCAPE_BASE - cluster


class RootOutsideGrid(LookupError):
    pass


class NoInvariantDisk(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    center: complex
    width: float
    height: float
    columns: int
    rows: int

    def __post_init__(self):
        if self.columns < 2 or self.rows < 2:
            raise ValueError("columns and rows must be at least 2")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("width and height must be positive")
        object.__setattr__(self, "center", complex(self.center))

    @classmethod
    def square(cls, half_extent: float, n: int, center: complex = 0j) -> "GridSpec":
        return cls(center, 2 * half_extent, 2 * half_extent, n, n)

    @property
    def dx(self) -> float:
        return self.width / self.columns

    @property
    def dy(self) -> float:
        return self.height / self.rows

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.columns)

    def xs(self) -> np.ndarray:
        c = np.arange(self.columns)
        return self.center.real + (2 * c + 1 - self.columns) * self.width / (2 * self.columns)

    def ys(self) -> np.ndarray:
        r = np.arange(self.rows)
        return self.center.imag + (self.rows - 1 - 2 * r) * self.height / (2 * self.rows)

    def points(self) -> np.ndarray:
        return self.xs()[None, :] + 1j * self.ys()[:, None]

    def pixel_of(self, z):
        """Row/column of the pixel containing ``z``; -1 where outside."""
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(invalid="ignore"):
            col = np.floor((z.real - (self.center.real - self.width / 2)) / self.dx)
            row = np.floor(((self.center.imag + self.height / 2) - z.imag) / self.dy)
            inside = (col >= 0) & (col < self.columns) & (row >= 0) & (row < self.rows)
        col = np.where(inside, col, -1).astype(np.int64)
        row = np.where(inside, row, -1).astype(np.int64)
        return row, col

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(self.center, self.width * factor, self.height * factor, self.columns, self.rows)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.center, self.width, self.height, self.columns * factor, self.rows * factor)

    def to_dict(self) -> dict:
        return {
            "center": [self.center.real, self.center.imag],
            "width": self.width,
            "height": self.height,
            "columns": self.columns,
            "rows": self.rows,
        }


@dataclass
class BasinGrid:
    spec: GridSpec
    labels: np.ndarray  # int32, see module constants
    kind: np.ndarray  # int8 orbit classification
    final: np.ndarray
    direction: np.ndarray
    iterations: np.ndarray
    registry: RootRegistry
    cluster_directions: list[float] = field(default_factory=list)
    cluster_weights: list[int] = field(default_factory=list)
    function: Optional[EntireFunction] = None

    @property
    def function_name(self) -> str:
        return str(self.function) if self.function is not None else ""

    @cached_property
    def components(self) -> np.ndarray:
        """Component id per pixel: 4-connected regions of equal label."""
        out = np.zeros(self.labels.shape, dtype=np.int64)
        offset = 0
        for value in np.unique(self.labels):
            lab, n = ndimage.label(self.labels == value, structure=FOUR)
            sel = lab > 0
            out[sel] = lab[sel] + offset
            offset += n
        return out

    def roots_inside(self) -> list[int]:
        ids = []
        for r in self.registry.roots:
            row, col = self.spec.pixel_of(r.position)
            if row >= 0:
                ids.append(r.root_id)
        return ids

    @property
    def classified(self) -> np.ndarray:
        return self.labels != LABEL_INDETERMINATE

    def summary(self) -> dict:
        n = self.labels.size
        return {
            "roots": [[r.position.real, r.position.imag] for r in self.registry.roots],
            "roots_in_grid": len(self.roots_inside()),
            "escape_clusters": [float(d) for d in self.cluster_directions],
            "escape_cluster_weights": [int(w) for w in self.cluster_weights],
            "indeterminate_fraction": float(np.count_nonzero(self.kind == INDETERMINATE)) / n,
            "pole_fraction": float(np.count_nonzero(self.kind == POLE)) / n,
        }


def _raster_tile(args):
    fun, pts, budget, tol = args
    return run_orbits(fun, pts, budget, tol)


def rasterize(
    fun,
    spec: GridSpec,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    workers: Optional[int] = None,
) -> BasinGrid:
    """Classify every pixel center of ``spec`` by its Newton orbit.

    Work is split into fixed bands of rows; the band layout does not depend
    on ``workers``, so labels are identical for any worker count.
    """
    fun = _as_function(fun)
    pts = spec.points()
    bands = [(fun, pts[r:r + TILE_ROWS], budget, tol) for r in range(0, spec.rows, TILE_ROWS)]
    if workers is None or workers <= 1:
        results = [_raster_tile(b) for b in bands]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_raster_tile, bands))
    kind = np.concatenate([r.kind for r in results])
    final = np.concatenate([r.final for r in results])
    direction = np.concatenate([r.direction for r in results])
    iterations = np.concatenate([r.iterations for r in results])
    return _label(fun, spec, kind, final, direction, iterations, tol)


def _label(fun, spec, kind, final, direction, iterations, tol: Tolerances) -> BasinGrid:
    kind = kind.copy()
    labels = np.full(spec.shape, LABEL_INDETERMINATE, dtype=np.int32)
    labels[kind == POLE] = LABEL_POLE

    # roots: dedup converged end points, register in positional order, renumber
    is_root = kind == ROOT
    registry = RootRegistry()
    if np.any(is_root):
        ends = final[is_root]
        q = tol.root_capture_radius
        keys = np.stack([np.round(ends.real / q), np.round(ends.imag / q)], axis=1)
        _, first = np.unique(keys, axis=0, return_index=True)
        reps = sorted(ends[first].tolist(), key=lambda c: (c.real, c.imag))
        for c in reps:
            try:
                register_root(registry, c, fun, tol)
            except NotARoot:
                pass
        registry, _ = registry.canonical()
    if len(registry) and np.any(is_root):
        pos = registry.positions
        ends = final[is_root]
        tree = cKDTree(np.c_[pos.real, pos.imag])
        dist, which = tree.query(np.c_[ends.real, ends.imag])
        ok = dist <= tol.root_merge_distance
        lab = np.where(ok, which, LABEL_INDETERMINATE)
        labels[is_root] = lab
        sub = kind[is_root]
        sub[~ok] = INDETERMINATE
        kind[is_root] = sub
    elif np.any(is_root):
        kind[is_root] = INDETERMINATE

    # escapes: cluster coherent directions on the circle
    esc = kind == ESCAPE
    labels[esc] = LABEL_ESCAPE_UNCLUSTERED
    coherent = esc & ~np.isnan(direction)
    centers, weights = [], []
    if np.any(coherent):
        angles = direction[coherent]
        groups = circular_clusters(angles, tol.direction_epsilon)
        lab = np.empty(angles.size, dtype=np.int32)
        for c, g in enumerate(groups):
            lab[g] = escape_label(c)
            centers.append(circular_mean(angles[g]))
            weights.append(int(g.size))
        labels[coherent] = lab
    return BasinGrid(spec, labels, kind, final, direction, iterations, registry, centers, weights, fun)


# ---------------------------------------------------------------- components


def _component_at(labels: np.ndarray, row: int, col: int) -> np.ndarray:
    lab, _ = ndimage.label(labels == labels[row, col], structure=FOUR)
    return lab == lab[row, col]


def _resolve_root(grid: BasinGrid, root) -> complex:
    if isinstance(root, (int, np.integer)):
        if not 0 <= root < len(grid.registry):
            raise RootOutsideGrid(f"root id {root} is not registered")
        return grid.registry[int(root)].position
    return complex(root)


def immediate_basin(grid: BasinGrid, root) -> np.ndarray:
    """Mask of the component of the root's label containing the root.

    ``root`` is a registry id of ``grid`` or a root position.
    """
    if not len(grid.registry):
        raise RootOutsideGrid("no roots registered")
    pos = _resolve_root(grid, root)
    rid, dist = grid.registry.nearest(pos)
    row, col = grid.spec.pixel_of(pos)
    row, col = int(row), int(col)
    if row < 0 or dist > 1e-3 * (1 + abs(pos)):
        raise RootOutsideGrid(f"root {pos} is not inside the grid")
    if grid.labels[row, col] != rid:
        # the pixel containing the root may be a boundary pixel; try neighbours
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1)):
            r2, c2 = row + dr, col + dc
            if 0 <= r2 < grid.spec.rows and 0 <= c2 < grid.spec.columns and grid.labels[r2, c2] == rid:
                row, col = r2, c2
                break
        else:
            return np.zeros(grid.labels.shape, dtype=bool)
    return _component_at(grid.labels, row, col)


def virtual_basin(grid: BasinGrid, cluster: int) -> np.ndarray:
    """Component of an escape cluster that reaches the grid edge along its direction.

    Walks inward along the ray from the grid center in the cluster's
    direction and takes the first pixel carrying the cluster label.
    """
    if not 0 <= cluster < len(grid.cluster_directions):
        raise LookupError(f"no escape cluster {cluster}")
    theta = grid.cluster_directions[cluster]
    spec = grid.spec
    u = complex(math.cos(theta), math.sin(theta))
    reach = math.hypot(spec.width, spec.height)
    step = min(spec.dx, spec.dy) / 2
    target = escape_label(cluster)
    t = reach
    while t >= 0:
        row, col = spec.pixel_of(spec.center + t * u)
        if row >= 0 and grid.labels[row, col] == target:
            return _component_at(grid.labels, int(row), int(col))
        t -= step
    return np.zeros(grid.labels.shape, dtype=bool)


@dataclass
class HoleComponent:
    rows: np.ndarray
    cols: np.ndarray
    touches_boundary: bool = False

    @property
    def size(self) -> int:
        return int(self.rows.size)

    def bbox(self) -> tuple[int, int, int, int]:
        return int(self.rows.min()), int(self.rows.max()), int(self.cols.min()), int(self.cols.max())


def detect_holes(mask: np.ndarray, ignore: Optional[np.ndarray] = None) -> list[HoleComponent]:
    """Bounded 8-connected components of the complement of ``mask``.

    A component consisting only of ``ignore`` pixels (e.g. unclassified
    pixels) is not reported.
    """
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndimage.label(~mask, structure=EIGHT)
    if n == 0:
        return []
    edge = np.unique(np.r_[lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    bounded = np.ones(n + 1, dtype=bool)
    bounded[0] = False
    bounded[edge] = False
    holes = []
    for k in np.flatnonzero(bounded):
        rows, cols = np.nonzero(lab == k)
        if ignore is not None and np.all(ignore[rows, cols]):
            continue
        holes.append(HoleComponent(rows, cols))
    return holes


def _target_mask(grid: BasinGrid, target) -> np.ndarray:
    kind, value = target
    if kind == "root":
        return immediate_basin(grid, complex(value))
    # ("escape", direction): the cluster closest to the given direction
    if not grid.cluster_directions:
        return np.zeros(grid.labels.shape, dtype=bool)
    d = [abs(np.angle(np.exp(1j * (c - value)))) for c in grid.cluster_directions]
    return virtual_basin(grid, int(np.argmin(d)))


def confirmed_holes(
    fun,
    spec: GridSpec,
    target,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    workers: Optional[int] = None,
    grid: Optional[BasinGrid] = None,
) -> tuple[list[HoleComponent], list[HoleComponent]]:
    """Holes of a basin mask that persist at twice the resolution.

    ``target`` is ``("root", position)`` or ``("escape", direction)``.
    Returns ``(found, confirmed)``: holes at the base resolution, and those
    among them that overlap a hole of the refined raster (compared on the
    base pixel lattice, one pixel of slack).
    """
    fun = _as_function(fun)
    if grid is None:
        grid = rasterize(fun, spec, budget, tol, workers)
    mask = _target_mask(grid, target)
    found = detect_holes(mask, ignore=grid.labels == LABEL_INDETERMINATE)
    if not found:
        return [], []
    fine_grid = rasterize(fun, spec.refined(2), budget, tol, workers)
    fine_mask = _target_mask(fine_grid, target)
    fine = detect_holes(fine_mask, ignore=fine_grid.labels == LABEL_INDETERMINATE)
    hit = np.zeros(spec.shape, dtype=bool)
    for h in fine:
        hit[h.rows // 2, h.cols // 2] = True
    hit = ndimage.binary_dilation(hit, structure=EIGHT)
    confirmed = [h for h in found if np.any(hit[h.rows, h.cols])]
    return found, confirmed


# ---------------------------------------------------------------- unboundedness


@dataclass
class UnboundedRound:
    round: int
    spec: GridSpec
    touches_boundary: bool
    basin_pixels: int


def check_unbounded(
    fun,
    root,
    spec: GridSpec,
    growth_factor: float = 2.0,
    rounds: int = 2,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    workers: Optional[int] = None,
) -> list[UnboundedRound]:
    """Grow the grid extent ``rounds`` times and test whether the root's
    immediate basin reaches the grid boundary each time.

    ``root`` is a root position, or a registry id resolved on ``spec``.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    fun = _as_function(fun)
    if isinstance(root, (int, np.integer)):
        root = rasterize(fun, spec, budget, tol, workers).registry[int(root)].position
    out = []
    for k in range(1, rounds + 1):
        s = spec.scaled(growth_factor**k)
        grid = rasterize(fun, s, budget, tol, workers)
        try:
            mask = immediate_basin(grid, complex(root))
        except RootOutsideGrid:
            mask = np.zeros(s.shape, dtype=bool)
        out.append(UnboundedRound(k, s, touches_boundary(mask), int(mask.sum())))
    return out


def touches_boundary(mask: np.ndarray) -> bool:
    return bool(mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any())


# ---------------------------------------------------------------- exhaustion


@dataclass
class ExhaustionLevel:
    k: int
    mask: np.ndarray


def invariant_radius(fun, root: complex, start: float, tol: Tolerances = Tolerances(), samples: int = 64, halvings: int = 40) -> float:
    """Largest radius ``start / 2**k`` whose disk maps strictly inside (by a
    tenth of the radius); 0.0 when none is found.

    Interior rings are sampled too: a boundary test alone accepts disks that
    swallow a pole of the Newton map.
    """
    fun = _as_function(fun)
    theta = 2 * np.pi * np.arange(samples) / samples
    unit = (np.arange(1, 17)[:, None] / 16 * np.exp(1j * theta)[None, :]).ravel()
    rho = start
    for _ in range(halvings):
        img, _, pole = newton_map_array(fun, root + rho * unit, tol.pole_guard)
        if not np.any(pole) and np.all(np.abs(img - root) < 0.9 * rho):
            return rho
        rho /= 2
    return 0.0


def invariant_disk(fun, root: complex, spec: GridSpec, tol: Tolerances = Tolerances(), samples: int = 64) -> float:
    """Radius of a disk around ``root`` mapped strictly inside itself.

    Starts at 8 pixels and halves down to 2 pixels; boundary samples must
    land at least one pixel inside the disk.
    """
    fun = _as_function(fun)
    px = min(spec.dx, spec.dy)
    rho = 8 * px
    theta = 2 * np.pi * np.arange(samples) / samples
    while rho >= 2 * px:
        b = root + rho * np.exp(1j * theta)
        img, _, pole = newton_map_array(fun, b, tol.pole_guard)
        if not np.any(pole) and np.all(np.abs(img - root) < rho - px):
            return rho
        rho /= 2
    raise NoInvariantDisk(f"no forward-invariant disk of radius >= 2 pixels around {root}")


def build_exhaustion(
    fun,
    root,
    spec: GridSpec,
    K: int,
    tol: Tolerances = Tolerances(),
) -> list[ExhaustionLevel]:
    """Pixel approximations of S_0 ⊆ S_1 ⊆ ... ⊆ S_K.

    S_0 is an invariant disk around the root. A pixel belongs to S_{k+1} when
    the pixel containing its Newton image lies in S_k and it is 4-connected
    to S_0 through such pixels; S_k is kept as a subset.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    fun = _as_function(fun)
    root = complex(root)
    row, col = spec.pixel_of(root)
    if row < 0:
        raise RootOutsideGrid(f"root {root} is not inside the grid")
    rho = invariant_disk(fun, root, spec, tol)
    pts = spec.points()
    s0 = np.abs(pts - root) < rho
    s0[int(row), int(col)] = True
    img, _, pole = newton_map_array(fun, pts, tol.pole_guard)
    irow, icol = spec.pixel_of(np.where(pole, np.inf, img))
    inside = irow >= 0
    levels = [ExhaustionLevel(0, s0)]
    seed = (int(row), int(col))
    cur = s0
    for k in range(1, K + 1):
        pre = np.zeros(spec.shape, dtype=bool)
        pre[inside] = cur[irow[inside], icol[inside]]
        pre |= cur
        lab, _ = ndimage.label(pre, structure=FOUR)
        cur = (lab == lab[seed]) | cur
        levels.append(ExhaustionLevel(k, cur))
    return levels


def exhaustion_ratio(level_mask: np.ndarray, basin: np.ndarray) -> float:
    """|S_k Δ basin| / |basin|."""
    return float(np.count_nonzero(level_mask ^ basin)) / max(1, int(np.count_nonzero(basin)))


# ---------------------------------------------------------------- absorbing sets


@dataclass(frozen=True)
class HalfPlane:
    """{z : Re(exp(-i*angle) * z) < offset}."""

    angle: float
    offset: float
    extent: float = 10.0  # boundary samples span this half-length

    def margin(self, z):
        return self.offset - np.real(np.exp(-1j * self.angle) * np.asarray(z))

    def boundary(self, n: int) -> np.ndarray:
        s = np.linspace(-self.extent, self.extent, n)
        return np.exp(1j * self.angle) * (self.offset + 1j * s)

    def asymptotic_direction(self) -> float:
        return (self.angle + np.pi) % (2 * np.pi)

    def accepts_direction(self, theta: float) -> bool:
        return abs(np.angle(np.exp(1j * (theta - self.asymptotic_direction())))) < np.pi / 2

    def to_dict(self) -> dict:
        return {"type": "half_plane", "angle": self.angle, "offset": self.offset}


@dataclass(frozen=True)
class Sector:
    """{z : |z| > apex_radius, |arg z - direction| < aperture/2}."""

    direction: float
    aperture: float
    apex_radius: float
    extent: float = 8.0  # rays are sampled out to apex_radius * extent

    def margin(self, z):
        z = np.asarray(z)
        r = np.abs(z)
        da = np.abs(np.angle(z * np.exp(-1j * self.direction)))
        half = self.aperture / 2
        angular = np.where(da < half, r * np.sin(np.minimum(half - da, np.pi / 2)), -(da - half))
        return np.minimum(r - self.apex_radius, angular)

    def boundary(self, n: int) -> np.ndarray:
        half = self.aperture / 2
        n_arc = n // 2
        n_ray = (n - n_arc) // 2
        arc = self.apex_radius * np.exp(1j * (self.direction + np.linspace(-half, half, n_arc)))
        radii = self.apex_radius * np.geomspace(1, self.extent, n_ray)
        up = radii * np.exp(1j * (self.direction + half))
        down = radii * np.exp(1j * (self.direction - half))
        rest = n - n_arc - 2 * n_ray
        return np.r_[arc, up, down, up[:rest]]

    def asymptotic_direction(self) -> float:
        return self.direction % (2 * np.pi)

    def accepts_direction(self, theta: float) -> bool:
        return abs(np.angle(np.exp(1j * (theta - self.direction)))) < self.aperture / 2

    def to_dict(self) -> dict:
        return {"type": "sector", "direction": self.direction, "aperture": self.aperture, "apex_radius": self.apex_radius}


Region = Union[HalfPlane, Sector]


@dataclass
class AbsorbingReport:
    region: dict
    boundary_margins: np.ndarray
    worst_margin: float
    boundary_pass: bool
    seeds: np.ndarray
    entered_at: np.ndarray  # iteration of first entry, -1 if never
    interior_pass: bool

    @property
    def passed(self) -> bool:
        return self.boundary_pass and self.interior_pass

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "boundary_samples": int(self.boundary_margins.size),
            "worst_margin": self.worst_margin,
            "boundary_pass": self.boundary_pass,
            "interior_seeds": int(self.seeds.size),
            "entered": int(np.count_nonzero(self.entered_at >= 0)),
            "max_entry_iteration": int(self.entered_at.max()) if self.entered_at.size else 0,
            "interior_pass": self.interior_pass,
        }


def verify_absorbing(
    fun,
    region: Region,
    boundary_samples: int = 256,
    interior_samples: int = 64,
    seed_box: GridSpec = GridSpec(0j, 4.0, 4.0, 2, 2),
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    absorb_margin: float = 1e-9,
    seed: int = 0,
) -> AbsorbingReport:
    """Check forward invariance of a region and that escaping orbits enter it.

    (a) every boundary sample maps into the region with margin at least
    ``absorb_margin``; (b) quasirandom seeds from ``seed_box`` that escape in
    a direction the region extends to all enter it within ``budget``.
    """
    from scipy.stats import qmc

    fun = _as_function(fun)
    b = region.boundary(boundary_samples)
    img, _, pole = newton_map_array(fun, b, tol.pole_guard)
    margins = np.where(pole, -np.inf, region.margin(img))
    worst = float(margins.min())
    boundary_pass = bool(worst >= absorb_margin)

    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    seeds: list[complex] = []
    for _ in range(16):
        u = sampler.random(4 * interior_samples)
        cand = (seed_box.center.real + (u[:, 0] - 0.5) * seed_box.width) + 1j * (
            seed_box.center.imag + (u[:, 1] - 0.5) * seed_box.height
        )
        batch = run_orbits(fun, cand, budget, tol)
        for c, k, d in zip(cand, batch.kind, batch.direction):
            if k == ESCAPE and not np.isnan(d) and region.accepts_direction(d):
                seeds.append(complex(c))
                if len(seeds) == interior_samples:
                    break
        if len(seeds) == interior_samples:
            break
    seeds_arr = np.array(seeds, dtype=np.complex128)
    entered = np.full(seeds_arr.size, -1, dtype=np.int64)
    z = seeds_arr.copy()
    for k in range(budget + 1):
        new = (entered < 0) & (region.margin(z) > 0)
        entered[new] = k
        if np.all(entered >= 0):
            break
        z, _, _ = newton_map_array(fun, z, tol.pole_guard)
    interior_pass = bool(seeds_arr.size == interior_samples and np.all(entered >= 0))
    return AbsorbingReport(region.to_dict(), margins, worst, boundary_pass, seeds_arr, entered, interior_pass)
