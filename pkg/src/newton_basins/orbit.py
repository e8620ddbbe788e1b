"""Newton orbit iteration, terminal classification and the root registry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .function import (
    POLE_GUARD,
    EntireFunction,
    _as_function,
    eval_jet,
    newton_map_array,
)

__all__ = [
    "ROOT",
    "ESCAPE",
    "POLE",
    "INDETERMINATE",
    "KIND_NAMES",
    "DEFAULT_BUDGET",
    "Tolerances",
    "OrbitResult",
    "OrbitBatch",
    "RootEntry",
    "RootRegistry",
    "NotARoot",
    "run_orbits",
    "iterate_orbit",
    "register_root",
    "classify_escape_direction",
    "circular_mean",
    "circular_std",
    "circular_clusters",
]

ROOT, ESCAPE, POLE, INDETERMINATE = 0, 1, 2, 3
KIND_NAMES = {ROOT: "root", ESCAPE: "escape", POLE: "pole", INDETERMINATE: "indeterminate"}
DEFAULT_BUDGET = 512


@dataclass(frozen=True)
class Tolerances:
    root_capture_radius: float = 1e-6
    root_merge_distance: float = 1e-4
    root_residual_tol: float = 1e-10
    escape_radius: float = 1e6
    # slow (parabolic-type) escape: a strictly growing, direction-coherent
    # window of iterates that all lie beyond this radius
    escape_min_radius: float = 2.0
    direction_window: int = 16
    direction_epsilon: float = 0.2
    pole_guard: float = POLE_GUARD

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        if self.direction_window < 2:
            raise ValueError("direction_window must be at least 2")


class NotARoot(ValueError):
    pass


@dataclass
class OrbitResult:
    kind: int
    iterations_used: int
    final_point: complex
    root_id: Optional[int] = None
    direction: Optional[float] = None  # None for a non-coherent escape
    trace: Optional[np.ndarray] = None

    @property
    def classification(self) -> str:
        return KIND_NAMES[self.kind]

    def __repr__(self) -> str:
        if self.kind == ROOT:
            what = f"Root({self.root_id})"
        elif self.kind == ESCAPE:
            what = "Escape(Rejected)" if self.direction is None else f"Escape({self.direction:.6f})"
        else:
            what = {POLE: "PoleHit", INDETERMINATE: "Indeterminate"}[self.kind]
        return f"OrbitResult({what}, iterations={self.iterations_used}, final={self.final_point})"


# ---------------------------------------------------------------- circular statistics


def circular_mean(angles) -> float:
    """Mean direction in [0, 2*pi)."""
    c = np.mean(np.exp(1j * np.asarray(angles, dtype=float)))
    return float(np.angle(c) % (2 * np.pi))


def circular_std(angles) -> float:
    r = abs(np.mean(np.exp(1j * np.asarray(angles, dtype=float))))
    if r <= 0:
        return math.inf
    return math.sqrt(max(0.0, -2.0 * math.log(min(r, 1.0))))


def classify_escape_direction(tail, tol: Tolerances = Tolerances()) -> Optional[float]:
    """Coherent escape direction of an orbit tail, or None (rejected).

    Uses the last ``direction_window`` points; all of them must lie beyond
    ``escape_min_radius``, their circular standard deviation must be below
    ``direction_epsilon`` and each argument within ``direction_epsilon`` of
    the mean.
    """
    tail = np.asarray(tail, dtype=np.complex128)
    w = tol.direction_window
    if tail.size < w:
        return None
    window = tail[-w:]
    if np.any(np.abs(window) <= tol.escape_min_radius):
        return None
    angles = np.angle(window)
    if circular_std(angles) >= tol.direction_epsilon:
        return None
    mean = circular_mean(angles)
    if np.abs(np.angle(np.exp(1j * (angles - mean)))).max() >= tol.direction_epsilon:
        return None
    return mean


def circular_clusters(angles, gap: float) -> list[np.ndarray]:
    """Single-linkage clustering of angles on the circle.

    Returns index arrays, ordered by the circular mean of each cluster.
    Two angles share a cluster iff they are joined by a chain of neighbours
    at most ``gap`` apart.
    """
    angles = np.mod(np.asarray(angles, dtype=float), 2 * np.pi)
    if angles.size == 0:
        return []
    order = np.argsort(angles, kind="stable")
    a = angles[order]
    gaps = np.diff(a)
    wrap_gap = a[0] + 2 * np.pi - a[-1]
    cuts = np.flatnonzero(gaps > gap)
    if cuts.size == 0 and wrap_gap <= gap:
        return [order]
    if wrap_gap > gap:
        bounds = np.r_[0, cuts + 1, a.size]
        groups = [order[bounds[i]:bounds[i + 1]] for i in range(len(bounds) - 1)]
    else:
        # the last run wraps around zero and joins the first one
        bounds = np.r_[0, cuts + 1, a.size]
        groups = [order[bounds[i]:bounds[i + 1]] for i in range(len(bounds) - 1)]
        first = groups.pop(0)
        groups[-1] = np.r_[groups[-1], first]
    groups.sort(key=lambda g: circular_mean(angles[g]))
    return groups


# ---------------------------------------------------------------- vectorized engine


@dataclass
class OrbitBatch:
    kind: np.ndarray  # int8
    final: np.ndarray  # complex128
    direction: np.ndarray  # float64, NaN where rejected or not an escape
    iterations: np.ndarray  # int32
    known_root: np.ndarray  # int32 index into known roots, -1 if new or not a root
    traces: Optional[list] = None


def run_orbits(
    fun,
    z0,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    known_roots=None,
    record: bool = False,
) -> OrbitBatch:
    """Iterate the Newton map from every seed in ``z0`` until classification.

    Each orbit stops at the first trigger, checked once per iteration:

    * pole: the Newton map is undefined at the current point;
    * root: the new iterate is within ``root_capture_radius`` of a known
      root, or the step is below that radius and shrinking;
    * escape: ``|z| > escape_radius``, or the last ``direction_window``
      iterates grow strictly in modulus beyond ``escape_min_radius`` with
      coherent arguments.

    Orbits still running after ``budget`` iterations are indeterminate.
    The result for one seed depends only on that seed.
    """
    fun = _as_function(fun)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    z0 = np.asarray(z0, dtype=np.complex128)
    shape = z0.shape
    n = z0.size
    W = tol.direction_window
    roots = np.asarray([] if known_roots is None else known_roots, dtype=np.complex128)

    kind = np.full(n, INDETERMINATE, dtype=np.int8)
    final = z0.ravel().copy()
    direction = np.full(n, np.nan)
    iterations = np.full(n, budget, dtype=np.int32)
    known = np.full(n, -1, dtype=np.int32)
    traces = [[p] for p in final] if record else None

    idx = np.arange(n)
    z = final.copy()
    hist = np.empty((n, W), dtype=np.complex128)
    hist[:, 0] = z
    run = np.zeros(n, dtype=np.int32)
    prev_step = np.full(n, np.inf)

    for k in range(1, budget + 1):
        if idx.size == 0:
            break
        zn, _, pole = newton_map_array(fun, z, tol.pole_guard)
        if record:
            for j, p in zip(idx, zn):
                if np.isfinite(p):
                    traces[j].append(p)
        with np.errstate(invalid="ignore"):
            step = np.abs(zn - z)
            mod_new = np.abs(zn)
            mod_old = np.abs(z)
        ok = ~pole

        near = np.zeros(idx.size, dtype=bool)
        which = np.full(idx.size, -1, dtype=np.int32)
        if roots.size:
            d = np.abs(zn[:, None] - roots[None, :])
            d = np.where(ok[:, None], d, np.inf)
            which = np.argmin(d, axis=1).astype(np.int32)
            near = d[np.arange(idx.size), which] < tol.root_capture_radius
        # contraction between two consecutive steps excludes parabolic drift,
        # whose steps are tiny but shrink only slowly
        # a zero step is an exact fixed point, hence f(z) = 0
        contracting = ((step < 0.95 * prev_step) & np.isfinite(prev_step)) | (step == 0)
        conv = ok & (step <= tol.root_capture_radius) & contracting
        is_root = ok & (near | conv)
        which = np.where(near, which, -1)

        run = np.where(ok & (mod_new > mod_old), run + 1, 0)
        hist[:, k % W] = zn
        grown = ok & ~is_root & (run >= W - 1)
        dirs = np.full(idx.size, np.nan)
        if np.any(grown):
            g = np.flatnonzero(grown)
            oldest = np.abs(hist[g, (k + 1) % W])
            g = g[oldest > tol.escape_min_radius]
            if g.size:
                u = np.exp(1j * np.angle(hist[g]))
                m = u.mean(axis=1)
                r = np.minimum(np.abs(m), 1.0)
                with np.errstate(divide="ignore"):
                    cstd = np.sqrt(np.maximum(0.0, -2.0 * np.log(r)))
                mean_dir = np.angle(m)
                spread = np.abs(np.angle(u * np.exp(-1j * mean_dir)[:, None])).max(axis=1)
                coherent = (cstd < tol.direction_epsilon) & (spread < tol.direction_epsilon)
                dirs[g[coherent]] = np.mod(np.angle(m[coherent]), 2 * np.pi)
        slow = ~np.isnan(dirs)
        fast = ok & ~is_root & (mod_new > tol.escape_radius)
        is_escape = slow | fast

        done = pole | is_root | is_escape
        if np.any(done):
            d_idx = idx[done]
            kind[d_idx] = np.where(
                pole[done], POLE, np.where(is_root[done], ROOT, ESCAPE)
            ).astype(np.int8)
            final[d_idx] = np.where(pole[done], z[done], zn[done])
            direction[d_idx] = np.where(is_escape[done], dirs[done], np.nan)
            iterations[d_idx] = k
            known[d_idx] = np.where(is_root[done], which[done], -1)
            keep = ~done
            idx = idx[keep]
            z = zn[keep]
            hist = hist[keep]
            run = run[keep]
            prev_step = step[keep]
        else:
            z = zn
            prev_step = step
    if idx.size:
        final[idx] = z

    return OrbitBatch(
        kind.reshape(shape),
        final.reshape(shape),
        direction.reshape(shape),
        iterations.reshape(shape),
        known.reshape(shape),
        [np.asarray(t) for t in traces] if record else None,
    )


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class RootEntry:
    root_id: int
    position: complex
    residual: float


@dataclass
class RootRegistry:
    roots: list[RootEntry] = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.roots], dtype=np.complex128)

    def __len__(self) -> int:
        return len(self.roots)

    def __getitem__(self, root_id: int) -> RootEntry:
        return self.roots[root_id]

    def nearest(self, z: complex) -> tuple[int, float]:
        if not self.roots:
            return -1, math.inf
        d = np.abs(self.positions - z)
        i = int(np.argmin(d))
        return self.roots[i].root_id, float(d[i])

    def canonical(self) -> tuple["RootRegistry", dict[int, int]]:
        """Registry renumbered by position (real part, then imaginary part)."""
        order = sorted(self.roots, key=lambda r: (r.position.real, r.position.imag))
        mapping = {r.root_id: i for i, r in enumerate(order)}
        return RootRegistry([RootEntry(i, r.position, r.residual) for i, r in enumerate(order)]), mapping


def polish_root(fun, candidate: complex, steps: int = 20, pole_guard: float = POLE_GUARD) -> complex:
    z = complex(candidate)
    for _ in range(steps):
        zn, _, pole = newton_map_array(fun, np.array([z]), pole_guard)
        if pole[0]:
            break
        zn = complex(zn[0])
        if zn == z:
            break
        z = zn
    return z


def register_root(registry: RootRegistry, candidate: complex, fun, tol: Tolerances = Tolerances()) -> int:
    """Return the id of the root near ``candidate``, registering it if new.

    New candidates are polished with at most 20 Newton steps; the polished
    point must stay within ``root_merge_distance`` of the candidate, with
    ``|f| <= root_residual_tol * (1 + |xi|)`` and a Newton step of at most
    ``root_residual_tol``; otherwise NotARoot is raised.
    """
    fun = _as_function(fun)
    rid, dist = registry.nearest(candidate)
    if dist <= tol.root_merge_distance:
        return rid
    xi = polish_root(fun, candidate, pole_guard=tol.pole_guard)
    scale = 1.0 + abs(xi)
    if not np.isfinite(xi) or abs(xi - candidate) > tol.root_merge_distance:
        raise NotARoot(f"{candidate} does not polish to a nearby fixed point")
    residual = abs(eval_jet(fun, xi).value)
    image, _, pole = newton_map_array(fun, np.array([xi]), tol.pole_guard)
    if pole[0] or residual > tol.root_residual_tol * scale or abs(image[0] - xi) > tol.root_residual_tol:
        raise NotARoot(f"{candidate} polishes to {xi} with residual {residual:.3g}")
    rid, dist = registry.nearest(xi)
    if dist <= tol.root_merge_distance:
        return rid
    rid = len(registry.roots)
    registry.roots.append(RootEntry(rid, xi, residual))
    return rid


def iterate_orbit(
    fun,
    z0: complex,
    budget: int = DEFAULT_BUDGET,
    registry: Optional[RootRegistry] = None,
    tol: Tolerances = Tolerances(),
    trace: bool = False,
) -> OrbitResult:
    """Classify the Newton orbit of one seed, registering newly found roots."""
    fun = _as_function(fun)
    if registry is None:
        registry = RootRegistry()
    batch = run_orbits(fun, np.array([z0]), budget, tol, registry.positions, record=trace)
    kind = int(batch.kind[0])
    final = complex(batch.final[0])
    res = OrbitResult(kind, int(batch.iterations[0]), final, trace=batch.traces[0] if trace else None)
    if kind == ROOT:
        if batch.known_root[0] >= 0:
            res.root_id = registry.roots[int(batch.known_root[0])].root_id
        else:
            try:
                res.root_id = register_root(registry, final, fun, tol)
            except NotARoot:
                res.kind = INDETERMINATE
    elif kind == ESCAPE:
        d = batch.direction[0]
        res.direction = None if np.isnan(d) else float(d)
    return res
