"""Channels to infinity, escape petals and their separation on large circles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .function import PoleOfMap, _as_function, family_newton_closed_form
from .grid import BasinGrid, invariant_radius
from .orbit import DEFAULT_BUDGET, ESCAPE, ROOT, Tolerances, run_orbits

__all__ = [
    "RadiusTooSmall",
    "NoEscapePixels",
    "CountMismatch",
    "ChannelReport",
    "PetalReport",
    "SeparationReport",
    "count_channels",
    "cluster_escape_directions",
    "conjugation_residual",
    "separation_check",
    "alternation_check",
    "circle_arcs",
    "arc_sequence",
]


class RadiusTooSmall(ValueError):
    pass


class NoEscapePixels(LookupError):
    pass


class CountMismatch(ValueError):
    pass


@dataclass
class ChannelReport:
    root: complex
    radius: float
    arc_count: int
    arcs: list[tuple[float, float]]
    samples_per_circle: int
    accepted: np.ndarray = field(repr=False)
    root_id: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "root_id": self.root_id,
            "root": [self.root.real, self.root.imag],
            "radius": self.radius,
            "arc_count": self.arc_count,
            "arcs": [list(a) for a in self.arcs],
            "samples_per_circle": self.samples_per_circle,
        }


@dataclass
class PetalReport:
    cluster_directions: list[float]
    cluster_weights: list[int]

    def to_dict(self) -> dict:
        return {"cluster_directions": self.cluster_directions, "cluster_weights": self.cluster_weights}


def circle_angles(samples: int) -> np.ndarray:
    return 2 * np.pi * np.arange(samples) / samples


def circle_arcs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Maximal cyclic runs of True as (first, last) sample indices."""
    flags = np.asarray(flags, dtype=bool)
    n = flags.size
    if not flags.any():
        return []
    if flags.all():
        return [(0, n - 1)]
    # rotate so that index 0 is False, then runs cannot wrap
    shift = int(np.flatnonzero(~flags)[0])
    rolled = np.roll(flags, -shift)
    d = np.diff(np.r_[0, rolled.astype(np.int8), 0])
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    runs = [((s + shift) % n, (e + shift) % n) for s, e in zip(starts, ends)]
    return sorted(runs)


def _segment_points(center: complex, radius: float, theta: np.ndarray, s: np.ndarray) -> np.ndarray:
    return center + radius * s[None, :] * np.exp(1j * theta)[:, None]


def count_channels(
    fun,
    root: complex,
    radius: float,
    samples_per_circle: int = 1440,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    segment_samples: int = 64,
    root_id: Optional[int] = None,
    outward_reach: float = 1.5,
) -> ChannelReport:
    """Count maximal arcs of the circle ``|z - root| = radius`` that are
    accesses of the root's immediate basin to infinity.

    A circle sample counts when every sample of the radial segment from the
    root out to ``outward_reach * radius`` through it converges to the root.
    The inner part ties the sample to the immediate basin rather than to a
    preimage component; the outer part discards bounded bulges of the basin
    that cross the circle without leading outward.
    """
    fun = _as_function(fun)
    root = complex(root)
    if samples_per_circle < 360:
        raise ValueError("samples_per_circle must be at least 360")
    rho = invariant_radius(fun, root, max(1.0, radius), tol)
    if radius <= rho:
        raise RadiusTooSmall(f"circle of radius {radius} does not leave the invariant disk of radius {rho}")
    theta = circle_angles(samples_per_circle)
    s_in = np.linspace(1.0, 0.0, segment_samples, endpoint=False)
    s_out = np.linspace(1.0, outward_reach, segment_samples // 4 + 1)
    pts = _segment_points(root, radius, theta, np.r_[s_in, s_out[1:]])
    batch = run_orbits(fun, pts, budget, tol, known_roots=[root])
    ok = (batch.kind == ROOT) & (batch.known_root == 0)
    accepted = ok.all(axis=1)
    # outward part, including the circle sample itself
    cols = np.r_[0, np.arange(segment_samples, pts.shape[1])]
    separating = _foreign_access(batch, cols, tol) & ~accepted
    runs = _merge_runs(circle_arcs(accepted), separating)
    arcs = [(float(theta[a]), float(theta[b])) for a, b in runs]
    return ChannelReport(root, float(radius), len(arcs), arcs, samples_per_circle, accepted, root_id)


def _foreign_access(batch, cols, tol: Tolerances) -> np.ndarray:
    """Samples whose outward segment lies in one foreign class: another root
    or one coherent escape direction."""
    kind = batch.kind[:, cols]
    final = batch.final[:, cols]
    other_root = (kind == ROOT) & (batch.known_root[:, cols] != 0)
    same_root = np.all(np.abs(final - final[:, :1]) <= tol.root_merge_distance, axis=1)
    root_access = other_root.all(axis=1) & same_root
    d = batch.direction[:, cols]
    esc = (kind == ESCAPE) & ~np.isnan(d)
    with np.errstate(invalid="ignore"):
        spread = np.abs(np.angle(np.exp(1j * (d - d[:, :1]))))
    escape_access = esc.all(axis=1) & np.all(spread < tol.direction_epsilon, axis=1)
    return root_access | escape_access


def _merge_runs(runs: list[tuple[int, int]], separating: np.ndarray) -> list[tuple[int, int]]:
    """Join cyclically adjacent runs whose gap holds no separating sample."""
    if len(runs) < 2:
        return runs
    m = separating.size

    def gap_separates(a_end: int, b_start: int) -> bool:
        idx = np.arange(a_end + 1, b_start) if a_end < b_start else np.r_[np.arange(a_end + 1, m), np.arange(0, b_start)]
        return bool(separating[idx].any())

    keep = [gap_separates(runs[i][1], runs[(i + 1) % len(runs)][0]) for i in range(len(runs))]
    if not any(keep):
        return [(0, m - 1)]
    # start after a separating gap so that merged runs do not wrap around the list
    first = (keep.index(True) + 1) % len(runs)
    order = runs[first:] + runs[:first]
    flags = keep[first:] + keep[:first]
    merged = []
    start = order[0][0]
    for i, ((a, b), sep) in enumerate(zip(order, flags)):
        if sep:
            merged.append((start, b))
            if i + 1 < len(order):
                start = order[i + 1][0]
    return sorted(merged)


def cluster_escape_directions(grid: BasinGrid) -> PetalReport:
    """Escape-direction clusters of a raster (computed during rasterization)."""
    if not grid.cluster_directions:
        raise NoEscapePixels("the grid has no coherent escape pixels")
    return PetalReport(list(map(float, grid.cluster_directions)), list(map(int, grid.cluster_weights)))


def conjugation_residual(n: int, zeta: complex) -> float:
    """|1 / N(1/zeta) - (zeta - zeta**(n+1))| for the family z*exp(-z**n/n)."""
    zeta = complex(zeta)
    if zeta == 0:
        raise PoleOfMap(zeta)
    image = family_newton_closed_form(n, 1 / zeta)
    if image == 0:
        raise PoleOfMap(zeta)
    return abs(1 / image - (zeta - zeta ** (n + 1)))


@dataclass
class SeparationReport:
    passed: bool
    sequence: list[str]
    reason: str = ""

    def to_dict(self) -> dict:
        return {"passed": self.passed, "sequence": self.sequence, "reason": self.reason}


def alternation_check(sequence: Sequence[str], n: int) -> SeparationReport:
    """Cyclic sequence of arc tokens ('C' for a channel, 'P<k>' for petal k)
    must alternate C, P, C, P, ... with length 2n and n distinct petals."""
    seq = list(sequence)
    if len(seq) != 2 * n:
        return SeparationReport(False, seq, f"expected {2 * n} arcs, found {len(seq)}")
    for a, b in zip(seq, seq[1:] + seq[:1]):
        if (a == "C") == (b == "C"):
            return SeparationReport(False, seq, f"adjacent arcs {a!r} and {b!r} do not alternate")
    petals = [t for t in seq if t != "C"]
    if len(set(petals)) != n:
        return SeparationReport(False, seq, "a petal appears more than once")
    return SeparationReport(True, seq)


def separation_check(
    grid: BasinGrid,
    channel_report: ChannelReport,
    petal_report: PetalReport,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = Tolerances(),
    segment_samples: int = 16,
    reach: float = 4.0,
) -> SeparationReport:
    """Check that channel arcs and petal arcs alternate around the circle.

    Petal samples are circle samples whose outward radial segment (out to
    ``reach`` times the radius) escapes entirely within one cluster.
    """
    n = len(petal_report.cluster_directions)
    if channel_report.arc_count != n:
        raise CountMismatch(f"{channel_report.arc_count} channels but {n} escape clusters")
    fun = grid.function
    m = channel_report.samples_per_circle
    theta = circle_angles(m)
    s = np.geomspace(1.0, reach, segment_samples)
    pts = _segment_points(channel_report.root, channel_report.radius, theta, s)
    batch = run_orbits(fun, pts, budget, tol)
    centers = np.asarray(petal_report.cluster_directions)
    d = np.abs(np.angle(np.exp(1j * (batch.direction[..., None] - centers))))
    nearest = np.argmin(np.where(np.isnan(d), np.inf, d), axis=-1)
    half_gap = math.pi / n if n else math.pi
    close = np.take_along_axis(d, nearest[..., None], axis=-1)[..., 0] < half_gap
    esc = (batch.kind == ESCAPE) & ~np.isnan(batch.direction) & close
    same = esc.all(axis=1) & (nearest == nearest[:, :1]).all(axis=1)
    petal_of = np.where(same, nearest[:, 0], -1)

    tokens = np.full(m, "", dtype=object)
    tokens[channel_report.accepted] = "C"
    for k in range(n):
        tokens[(petal_of == k) & ~channel_report.accepted] = f"P{k}"
    return alternation_check(arc_sequence(tokens), n)


def arc_sequence(tokens) -> list[str]:
    """Tokens of the maximal runs around the circle, unmarked ("") runs dropped.

    Consecutive runs of the same petal (split by unmarked samples) are one
    petal arc; consecutive channel runs stay separate.
    """
    tokens = list(tokens)
    m = len(tokens)
    starts = [j for j in range(m) if tokens[j] != tokens[j - 1]]
    if not starts:
        return [tokens[0]] if tokens and tokens[0] else []
    runs = [tokens[j] for j in starts if tokens[j]]
    out: list[str] = []
    for t in runs:
        if out and out[-1] == t and t != "C":
            continue
        out.append(t)
    if len(out) > 1 and out[0] == out[-1] and out[0] != "C":
        out.pop()
    return out
