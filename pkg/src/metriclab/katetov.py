"""Admissible one-point extension functions and a lazily grown fragment of
the rational universal metric space, with partial isometries extended by
back-and-forth."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .metric import MetricSpace, RationalLike, frac

PREFER_EXISTING = "prefer-existing"
ALWAYS_FRESH = "always-fresh"


@dataclass(frozen=True)
class AdmissibilityResult:
    ok: bool
    pair: Optional[tuple[int, int]]
    detail: str = ""


def is_admissible(space: MetricSpace, values: Sequence[RationalLike]) -> AdmissibilityResult:
    """Check |f(x)-f(y)| <= d(x,y) <= f(x)+f(y) for all pairs.

    Returns the first violated pair; wrong arity or negative values raise.
    """
    vals = [frac(v) for v in values]
    if len(vals) != space.n:
        raise ValueError(f"{len(vals)} values for {space.n} points")
    for i, v in enumerate(vals):
        if v < 0:
            raise ValueError(f"negative value {v} at point {i}")
    for i, j in space.pairs():
        d = space.d(i, j)
        if abs(vals[i] - vals[j]) > d:
            return AdmissibilityResult(False, (i, j),
                                       f"|f({i})-f({j})| = {abs(vals[i]-vals[j])} > d = {d}")
        if d > vals[i] + vals[j]:
            return AdmissibilityResult(False, (i, j),
                                       f"d = {d} > f({i})+f({j}) = {vals[i]+vals[j]}")
    return AdmissibilityResult(True, None)


class KatetovFunction:
    """An admissible function controlled by a subset of its base space.

    Encodes the abstract one-point extension whose new point sits at
    distance ``values[x]`` from each x.
    """

    __slots__ = ("space", "values", "support")

    def __init__(self, space: MetricSpace, values: Sequence[RationalLike],
                 support: Optional[Iterable[int]] = None, *, _checked: bool = False):
        self.space = space
        self.values = tuple(frac(v) for v in values)
        self.support = tuple(sorted(set(support))) if support is not None \
            else tuple(range(space.n))
        if not _checked:
            rep = is_admissible(space, self.values)
            if not rep.ok:
                raise ValueError(f"inadmissible function: {rep.detail}")
            if not self.support:
                raise ValueError("support must be non-empty")
            for x in range(space.n):
                ctrl = min(space.d(x, y) + self.values[y] for y in self.support)
                if ctrl != self.values[x]:
                    raise ValueError(
                        f"not controlled by {self.support}: f({x}) = {self.values[x]} "
                        f"but min formula gives {ctrl}")

    def __call__(self, x: int) -> Fraction:
        return self.values[x]

    def __repr__(self) -> str:
        return f"KatetovFunction({self.values}, support={self.support})"


def controlled_extension(space: MetricSpace, support: Iterable[int],
                         values_on_support: Sequence[RationalLike]) -> KatetovFunction:
    """Largest 1-Lipschitz extension of an admissible function on a subset:
    f(x) = min over support of d(x,y) + f(y)."""
    support = list(support)
    vals = [frac(v) for v in values_on_support]
    if len(support) != len(vals):
        raise ValueError("support and values have different lengths")
    if len(set(support)) != len(support):
        raise ValueError("support has repeated points")
    sub = space.restrict(support)
    rep = is_admissible(sub, vals)
    if not rep.ok:
        i, j = rep.pair
        raise ValueError(
            f"values are inadmissible on the support at ({support[i]},{support[j]}): {rep.detail}")
    by_point = dict(zip(support, vals))
    full = [min(space.d(x, y) + by_point[y] for y in support) for x in range(space.n)]
    return KatetovFunction(space, full, support)


def kuratowski_function(space: MetricSpace, point: int) -> KatetovFunction:
    """The distance function d(., point); controlled by the singleton."""
    return KatetovFunction(space, [space.d(x, point) for x in range(space.n)], (point,))


def one_point_extend(space: MetricSpace, f, label: Optional[str] = None,
                     *, revalidate: bool = False) -> MetricSpace:
    """Extend by one point at the distances prescribed by an admissible f.

    Admissibility makes the triangle inequality automatic; the result is
    only re-validated in debug mode (``revalidate``).  A zero value is
    rejected: it would duplicate an existing point, and callers wanting
    that should reuse the point instead.
    """
    if isinstance(f, KatetovFunction):
        if f.space is not space and f.space != space:
            raise ValueError("function lives on a different space")
        vals = f.values
    else:
        vals = tuple(frac(v) for v in f)
        rep = is_admissible(space, vals)
        if not rep.ok:
            raise ValueError(f"inadmissible extension: {rep.detail}")
    zero_at = [x for x in range(space.n) if vals[x] == 0]
    if zero_at:
        raise ValueError(f"value 0 at point {zero_at[0]}: extension would duplicate it")
    if label is None:
        label = f"p{space.n}"
        while label in space.labels:
            label = label + "'"
    if label in space.labels:
        raise ValueError(f"label {label!r} already used")
    rows = [list(r) + [vals[i]] for i, r in enumerate(space.rows)]
    rows.append(list(vals) + [Fraction(0)])
    return MetricSpace(rows, space.labels + (label,), _checked=not revalidate)


class PartialIsometry:
    """Bijective distance-preserving partial self-map of a fragment's space.

    The inverse record is maintained in lockstep with the forward one.
    """

    __slots__ = ("fwd", "inv")

    def __init__(self, mapping: Optional[Mapping[int, int]] = None):
        self.fwd: dict[int, int] = {}
        self.inv: dict[int, int] = {}
        if mapping:
            for p, q in mapping.items():
                self.define(p, q)

    def define(self, p: int, q: int) -> None:
        if p in self.fwd and self.fwd[p] != q:
            raise ValueError(f"{p} already maps to {self.fwd[p]}")
        if q in self.inv and self.inv[q] != p:
            raise ValueError(f"{q} already has preimage {self.inv[q]}")
        self.fwd[p] = q
        self.inv[q] = p

    def domain(self) -> list[int]:
        return sorted(self.fwd)

    def codomain(self) -> list[int]:
        return sorted(self.inv)

    def preserves_distances(self, space: MetricSpace) -> bool:
        dom = self.domain()
        return all(space.d(a, b) == space.d(self.fwd[a], self.fwd[b])
                   for a, b in itertools.combinations(dom, 2))

    def compose(self, other: "PartialIsometry") -> "PartialIsometry":
        """self after other, on the overlap where both are defined."""
        out = PartialIsometry()
        for p, q in other.fwd.items():
            if q in self.fwd:
                out.define(p, self.fwd[q])
        return out

    def __repr__(self) -> str:
        pairs = ", ".join(f"{p}->{q}" for p, q in sorted(self.fwd.items()))
        return f"PartialIsometry({pairs})"


class FragmentBudgetError(RuntimeError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class UrysohnFragment:
    """A growing finite rational metric space with partial isometries.

    Single-writer: growth and isometry extension are serialized; the
    space snapshot is immutable between mutations.
    """

    def __init__(self, seed: MetricSpace, *, budget: int = 10_000,
                 reuse: str = PREFER_EXISTING):
        if reuse not in (PREFER_EXISTING, ALWAYS_FRESH):
            raise ValueError(f"unknown reuse policy {reuse!r}")
        self.space = seed
        self.budget = budget
        self.reuse = reuse
        self.generators: list[PartialIsometry] = []
        self.history: list[str] = []
        self.complete = True  # cleared when a growth run hits the budget

    def add_generator(self, seed_map: Optional[Mapping[int, int]] = None) -> int:
        iso = PartialIsometry(seed_map)
        if not iso.preserves_distances(self.space):
            raise ValueError("seed map is not distance-preserving")
        self.generators.append(iso)
        self.history.append(f"gen {len(self.generators) - 1} seeded {sorted(iso.fwd.items())}")
        return len(self.generators) - 1

    def add_point(self, f: KatetovFunction, label: Optional[str] = None) -> int:
        if self.space.n >= self.budget:
            raise FragmentBudgetError(f"fragment budget of {self.budget} points exhausted")
        self.space = one_point_extend(self.space, f, label)
        self.history.append(f"extend -> {self.space.n} points")
        return self.space.n - 1

    def realize(self, constraints: Mapping[int, RationalLike],
                mode: Optional[str] = None) -> int:
        """A point at the exact prescribed distances from the constraint set.

        Under ``prefer-existing`` the lexicographically smallest matching
        point is reused; otherwise the constraint profile is
        controlled-extended to the whole space and realized fresh.
        """
        mode = mode or self.reuse
        items = sorted((p, frac(v)) for p, v in constraints.items())
        if not items:
            raise ValueError("empty constraint set")
        for p, v in items:
            if v == 0:
                return p  # forced coincidence
        if mode == PREFER_EXISTING:
            for q in range(self.space.n):
                if all(self.space.d(q, p) == v for p, v in items):
                    return q
        f = controlled_extension(self.space, [p for p, _ in items], [v for _, v in items])
        return self.add_point(f)

    def apply(self, gen_index: int, point: int, direction: str = "forward",
              mode: Optional[str] = None) -> int:
        """Image of a point under a stored partial isometry, extending it
        by one pair when the point is not yet mapped.

        The required image has prescribed distances d(t, g(a)) = d(point, a)
        for every a in the current domain; an empty domain maps the point
        to itself.
        """
        if not (0 <= gen_index < len(self.generators)):
            raise KeyError(f"unknown generator {gen_index}")
        if not (0 <= point < self.space.n):
            raise KeyError(f"unknown point {point}")
        iso = self.generators[gen_index]
        if direction == "forward":
            known, other = iso.fwd, iso.inv
        elif direction == "inverse":
            known, other = iso.inv, iso.fwd
        else:
            raise ValueError(f"direction must be forward or inverse, got {direction!r}")
        if point in known:
            return known[point]
        if not known:
            known[point] = point
            other[point] = point
            self.history.append(f"gen {gen_index} {direction}: {point} -> {point} (empty domain)")
            return point
        constraints = {img: self.space.d(point, src) for src, img in known.items()}
        t = self.realize(constraints, mode)
        known[point] = t
        other[t] = point
        self.history.append(f"gen {gen_index} {direction}: {point} -> {t}")
        return t

    def audit_generators(self) -> bool:
        """Debug check: every stored partial isometry preserves distances."""
        return all(iso.preserves_distances(self.space) for iso in self.generators)


def fragment_apply(frag: UrysohnFragment, gen_index: int, direction: str,
                   point: int, mode: Optional[str] = None) -> int:
    return frag.apply(gen_index, point, direction, mode)


@dataclass(frozen=True)
class ExtensionPropertyResult:
    ok: bool
    missing: Optional[tuple]  # (subset, profile) of the first unrealized profile
    subsets_checked: int
    profiles_checked: int


def _admissible_profiles(space: MetricSpace, subset: Sequence[int], grid: Sequence[Fraction]):
    sub = space.restrict(subset)
    for profile in itertools.product(grid, repeat=len(subset)):
        if is_admissible(sub, profile).ok:
            yield profile


def extension_property_check(space: MetricSpace, grid: Sequence[RationalLike],
                             k: int) -> ExtensionPropertyResult:
    """True iff every admissible grid-valued profile over every subset of at
    most k points is realized exactly by some point of the space."""
    grid = sorted({frac(v) for v in grid})
    if any(v <= 0 for v in grid):
        raise ValueError("grid values must be positive")
    subsets = profiles = 0
    for size in range(1, min(k, space.n) + 1):
        for subset in itertools.combinations(range(space.n), size):
            subsets += 1
            for profile in _admissible_profiles(space, subset, grid):
                profiles += 1
                if not any(all(space.d(q, p) == v for p, v in zip(subset, profile))
                           for q in range(space.n)):
                    return ExtensionPropertyResult(False, (subset, profile), subsets, profiles)
    return ExtensionPropertyResult(True, None, subsets, profiles)


def grow_fragment(seed: MetricSpace, grid: Sequence[RationalLike], k: int,
                  rounds: int, seed_rng: int = 0, *, budget: int = 10_000) -> UrysohnFragment:
    """Saturate grid-valued one-point extensions for ``rounds`` rounds.

    After round r every admissible grid profile over every <=k subset of
    the round-(r-1) space is realized.  The processing order is shuffled
    by the seed, the postcondition is not.  On budget exhaustion the
    partial fragment is returned with ``complete`` cleared.
    """
    grid = sorted({frac(v) for v in grid})
    if any(v <= 0 for v in grid):
        raise ValueError("grid values must be positive")
    frag = UrysohnFragment(seed, budget=budget)
    rng = random.Random(seed_rng)
    for _ in range(rounds):
        base_n = frag.space.n
        tasks = []
        for size in range(1, min(k, base_n) + 1):
            for subset in itertools.combinations(range(base_n), size):
                for profile in _admissible_profiles(frag.space, subset, grid):
                    tasks.append((subset, profile))
        rng.shuffle(tasks)
        for subset, profile in tasks:
            try:
                frag.realize(dict(zip(subset, profile)), PREFER_EXISTING)
            except FragmentBudgetError:
                frag.complete = False
                return frag
    return frag
