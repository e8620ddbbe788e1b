"""Maximal extension of a curve under backward iteration of the Newton map.

Given a seed curve delta on [0, 1] with N(delta(1)) = delta(0), the extension
gamma satisfies gamma = delta on [0, 1] and N(gamma(t + 1)) = gamma(t).  It is
built one parameter unit at a time by pulling back the previous unit along
the local inverse branch of N, tracked from sample to sample.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .function import (
    POLE_GUARD,
    DerivativeZero,
    NearPole,
    _as_function,
    newton_step_and_derivative,
)

__all__ = [
    "CurveTolerances",
    "SeedCurve",
    "SeedInvalid",
    "BranchLost",
    "NoConvergence",
    "NearCritical",
    "BudgetReached",
    "CriticalHit",
    "EscapedToInfinity",
    "CurveExtension",
    "pull_back_point",
    "branch_radius",
    "extend_curve",
    "straight_seed",
    "read_seed_csv",
    "write_curve_csv",
    "read_curve_csv",
]


class SeedInvalid(ValueError):
    pass


class BranchLost(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    pass


class NearCritical(ArithmeticError):
    def __init__(self, w: complex):
        super().__init__(f"|N'| below the critical guard at {w}")
        self.point = w


@dataclass(frozen=True)
class CurveTolerances:
    seed_closure_tol: float = 1e-8
    pullback_tol: float = 1e-10
    pullback_budget: int = 50
    crit_guard: float = 1e-8
    branch_floor: float = 1e-3
    initial_step: float = 1 / 64
    max_subdivisions: int = 12
    critical_persistence: int = 3
    escape_radius: float = 1e6
    pole_guard: float = POLE_GUARD

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        if not self.initial_step <= 1:
            raise ValueError("initial_step must be at most 1")


def _map(fun, w: complex, tol: CurveTolerances) -> tuple[complex, complex]:
    """N(w) and N'(w); poles of N and zeros of f' lose the branch."""
    try:
        return newton_step_and_derivative(fun, w, tol.pole_guard)
    except (DerivativeZero, NearPole) as exc:
        raise BranchLost(f"Newton map undefined near {w}") from exc


def branch_radius(fun, w: complex, tol: CurveTolerances = CurveTolerances()) -> float:
    """Half the estimated distance |N'/N''| from ``w`` to the nearest critical
    point, with N'' taken by central differences; floored at ``branch_floor``."""
    fun = _as_function(fun)
    _, d = _map(fun, w, tol)
    h = 1e-6 * (1 + abs(w))
    try:
        _, dp = _map(fun, w + h, tol)
        _, dm = _map(fun, w - h, tol)
    except BranchLost:
        return tol.branch_floor
    d2 = (dp - dm) / (2 * h)
    if d2 == 0:
        return math.inf
    return max(tol.branch_floor, 0.5 * abs(d) / abs(d2))


def pull_back_point(fun, target: complex, seed: complex, tol: CurveTolerances = CurveTolerances(), radius: Optional[float] = None) -> complex:
    """Solve N(w) = target on the inverse branch through ``seed``.

    Damped Newton iteration on w -> N(w) - target.  The residual must drop to
    ``pullback_tol * (1 + |target|)``.
    """
    fun = _as_function(fun)
    target = complex(target)
    seed = complex(seed)
    image, d = _map(fun, seed, tol)
    if abs(d) < tol.crit_guard:
        raise NearCritical(seed)
    if radius is None:
        radius = branch_radius(fun, seed, tol)
    goal = tol.pullback_tol * (1 + abs(target))
    w = seed
    res = abs(image - target)
    for _ in range(tol.pullback_budget):
        if res <= goal:
            return w
        step = (image - target) / d
        lam = 1.0
        while True:
            trial = w - lam * step
            if abs(trial - seed) > radius:
                if lam < 1 / 64:
                    raise BranchLost(f"iteration left the branch disk of radius {radius:.3g} around {seed}")
                lam /= 2
                continue
            t_image, t_d = _map(fun, trial, tol)
            t_res = abs(t_image - target)
            if t_res < res or lam < 1 / 64:
                break
            lam /= 2
        w, image, d, res = trial, t_image, t_d, t_res
        if abs(d) < tol.crit_guard:
            raise NearCritical(w)
    if res <= goal:
        return w
    raise NoConvergence(f"residual {res:.3g} after {tol.pullback_budget} steps")


@dataclass
class SeedCurve:
    t: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.points = np.asarray(self.points, dtype=np.complex128)
        if self.t.ndim != 1 or self.t.shape != self.points.shape or self.t.size < 2:
            raise SeedInvalid("seed needs at least two samples with matching t and points")

    @classmethod
    def from_samples(cls, samples) -> "SeedCurve":
        t, z = zip(*samples)
        return cls(np.array(t), np.array(z))

    def at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.interp(s, self.t, self.points.real) + 1j * np.interp(s, self.t, self.points.imag)

    def validate(self, fun, tol: CurveTolerances = CurveTolerances()) -> None:
        if self.t[0] != 0 or self.t[-1] != 1:
            raise SeedInvalid("seed parameter must run from t=0 to t=1")
        if np.any(np.diff(self.t) <= 0):
            raise SeedInvalid("seed parameter must be strictly increasing")
        if not np.all(np.isfinite(self.points)):
            raise SeedInvalid("seed points must be finite")
        fun = _as_function(fun)
        try:
            end_image, _ = newton_step_and_derivative(fun, complex(self.points[-1]), tol.pole_guard)
        except (DerivativeZero, NearPole) as exc:
            raise SeedInvalid(f"closure: Newton map undefined at delta(1) = {self.points[-1]}") from exc
        gap = abs(end_image - self.points[0])
        if gap > tol.seed_closure_tol:
            raise SeedInvalid(f"closure: |N(delta(1)) - delta(0)| = {gap:.3g} exceeds {tol.seed_closure_tol}")
        for z in self.points:
            try:
                _, d = newton_step_and_derivative(fun, complex(z), tol.pole_guard)
            except (DerivativeZero, NearPole) as exc:
                raise SeedInvalid(f"critical guard: Newton map undefined at {z}") from exc
            if abs(d) < tol.crit_guard:
                raise SeedInvalid(f"critical guard: |N'| = {abs(d):.3g} at seed sample {z}")


def straight_seed(fun, end: complex, samples: int = 2) -> SeedCurve:
    """Segment from N(end) to ``end``; closes by construction."""
    fun = _as_function(fun)
    start, _ = newton_step_and_derivative(fun, complex(end))
    t = np.linspace(0.0, 1.0, samples)
    return SeedCurve(t, start + t * (complex(end) - start))


@dataclass(frozen=True)
class BudgetReached:
    name = "BudgetReached"

    def to_dict(self) -> dict:
        return {"outcome": self.name}


@dataclass(frozen=True)
class CriticalHit:
    point: complex
    name = "CriticalHit"

    def to_dict(self) -> dict:
        return {"outcome": self.name, "point": [self.point.real, self.point.imag]}


@dataclass(frozen=True)
class EscapedToInfinity:
    # the sample one parameter unit before the escape; reported, not certified
    asymptotic_value: complex
    name = "EscapedToInfinity"

    def to_dict(self) -> dict:
        v = self.asymptotic_value
        return {"outcome": self.name, "asymptotic_value": [v.real, v.imag]}


Outcome = Union[BudgetReached, CriticalHit, EscapedToInfinity]


@dataclass
class CurveExtension:
    t: np.ndarray
    points: np.ndarray
    outcome: Outcome
    t_max: float
    subdivisions: int = 0
    meta: dict = field(default_factory=dict)

    def point_at(self, t: float) -> complex:
        idx = np.flatnonzero(np.isclose(self.t, t, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(t)
        return complex(self.points[idx[0]])

    def functional_residuals(self, fun, tol: CurveTolerances = CurveTolerances()) -> np.ndarray:
        """|N(gamma(t)) - gamma(t-1)| / (1 + |gamma(t-1)|) for samples with t >= 1."""
        fun = _as_function(fun)
        lookup = {round(float(t), 12): z for t, z in zip(self.t, self.points)}
        out = []
        for t, z in zip(self.t, self.points):
            if t < 1:
                continue
            prev = lookup.get(round(float(t) - 1, 12))
            if prev is None:
                continue
            image, _ = newton_step_and_derivative(fun, complex(z), tol.pole_guard)
            out.append(abs(image - prev) / (1 + abs(prev)))
        return np.array(out)

    def summary(self) -> dict:
        return {
            **self.outcome.to_dict(),
            "t_max": self.t_max,
            "samples": int(self.t.size),
            "subdivisions": self.subdivisions,
            **self.meta,
        }


class _Tracer:
    """Shared parameter grid s in [0, 1] across all units; unit k holds
    gamma(k + s).  Inserting a parameter inserts it in every unit."""

    def __init__(self, fun, seed: SeedCurve, tol: CurveTolerances):
        self.fun = fun
        self.seed = seed
        self.tol = tol
        n = int(round(1 / tol.initial_step))
        grid = np.union1d(np.linspace(0.0, 1.0, n + 1), seed.t)
        self.s: list[float] = list(map(float, grid))
        self.units: list[list[complex]] = [list(map(complex, seed.at(grid)))]
        self.finest = tol.initial_step / 2**tol.max_subdivisions
        self.inserted = 0

    def _insert(self, j: int, upto: int) -> bool:
        """Insert the midpoint of (s[j], s[j+1]) into units 0..upto-1 and
        return False when a gap is already at the finest level or an earlier
        unit cannot be refined."""
        a, b = self.s[j], self.s[j + 1]
        if b - a <= self.finest * (1 + 1e-9):
            return False
        mid = 0.5 * (a + b)
        new = [complex(self.seed.at(mid))]
        for k in range(1, upto):
            target = new[k - 1]
            w = None
            for start in (self.units[k][j], self.units[k][j + 1]):
                try:
                    w = pull_back_point(self.fun, target, start, self.tol)
                    break
                except (BranchLost, NoConvergence, NearCritical):
                    continue
            if w is None:
                return False
            new.append(w)
        self.s.insert(j + 1, mid)
        for k in range(upto):
            self.units[k].insert(j + 1, new[k])
        self.inserted += 1
        return True

    def extend_unit(self, m: int, t_limit: float) -> Optional[Outcome]:
        """Compute gamma on [m, m+1] (clipped to t_limit).  Returns a terminal
        outcome, or None when the unit completed."""
        tol = self.tol
        prev = self.units[m - 1]
        cur = [prev[-1]]
        self.units.append(cur)
        j = 0
        while j < len(self.s) - 1 and m + self.s[j + 1] <= t_limit + 1e-12:
            target = self.units[m - 1][j + 1]
            try:
                w = pull_back_point(self.fun, target, cur[j], tol)
            except (BranchLost, NoConvergence, NearCritical) as exc:
                if self._insert(j, m):
                    continue
                # finest level: the failure must persist over further
                # starting guesses before it counts as a critical point
                w = self._retry(target, cur, j)
                if w is None:
                    point = exc.point if isinstance(exc, NearCritical) else cur[j]
                    return CriticalHit(complex(point))
            cur.append(w)
            j += 1
            if abs(w) > tol.escape_radius:
                return EscapedToInfinity(complex(self.units[m - 1][j]))
        return None

    def _retry(self, target: complex, cur: list[complex], j: int) -> Optional[complex]:
        starts = []
        if j >= 1:
            starts.append(2 * cur[j] - cur[j - 1])
            starts.append(1.5 * cur[j] - 0.5 * cur[j - 1])
        starts.append(cur[j] + 1e-3 * (1 + abs(cur[j])))
        for start in starts[: self.tol.critical_persistence - 1]:
            try:
                w = pull_back_point(self.fun, target, start, self.tol)
            except (BranchLost, NoConvergence, NearCritical):
                continue
            if abs(w - cur[j]) <= branch_radius(self.fun, cur[j], self.tol):
                return w
        return None


def extend_curve(fun, seed: SeedCurve, t_budget: float, tol: CurveTolerances = CurveTolerances()) -> CurveExtension:
    """Extend ``seed`` by backward iteration up to parameter ``t_budget``.

    Exactly one outcome is returned: BudgetReached (the extension exists on
    [0, t_budget]; this is not a proof that it exists forever), CriticalHit
    (the inverse branch cannot be continued at the finest subdivision), or
    EscapedToInfinity (a sample left the disk of radius ``escape_radius``).
    """
    fun = _as_function(fun)
    if not t_budget >= 1:
        raise ValueError("t_budget must be at least 1")
    seed.validate(fun, tol)
    tracer = _Tracer(fun, seed, tol)
    outcome: Outcome = BudgetReached()
    m = 1
    while m < t_budget:
        result = tracer.extend_unit(m, t_budget)
        if result is not None:
            outcome = result
            break
        m += 1
    t, z = [], []
    for k, unit in enumerate(tracer.units):
        for j, w in enumerate(unit):
            if k > 0 and j == 0:
                continue
            t.append(k + tracer.s[j])
            z.append(w)
    t_arr = np.array(t)
    return CurveExtension(t_arr, np.array(z, dtype=np.complex128), outcome, float(t_arr[-1]), tracer.inserted)


def read_seed_csv(source) -> SeedCurve:
    """Seed from CSV rows ``t,re,im``; a header row and ``#`` lines are skipped."""
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    t, z = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].lstrip().startswith("#") or row[0].strip() == "t":
            continue
        if len(row) != 3:
            raise SeedInvalid(f"line {lineno}: expected 3 columns t,re,im, got {len(row)}")
        try:
            t.append(float(row[0]))
            z.append(complex(float(row[1]), float(row[2])))
        except ValueError as exc:
            raise SeedInvalid(f"line {lineno}: {exc}") from exc
    return SeedCurve(np.array(t), np.array(z))


def write_curve_csv(target, curve: Union[CurveExtension, SeedCurve]) -> None:
    """Rows ``t,re,im`` in full precision; an extension gets a ``#`` JSON footer."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "re", "im"])
    for t, z in zip(curve.t, curve.points):
        w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag))])
    if isinstance(curve, CurveExtension):
        out.write("#" + json.dumps(curve.summary(), sort_keys=True) + "\n")
    if hasattr(target, "write"):
        target.write(out.getvalue())
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(out.getvalue())


def read_curve_csv(source) -> tuple[SeedCurve, dict]:
    """Samples and footer record of a file written by ``write_curve_csv``."""
    text = source.read() if hasattr(source, "read") else open(source, encoding="utf-8").read()
    footer = {}
    for line in text.splitlines():
        if line.startswith("#"):
            footer = json.loads(line[1:])
    return read_seed_csv(io.StringIO(text)), footer
