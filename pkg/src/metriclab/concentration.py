"""Finite-scale concentration machinery: the convergence-in-measure metric
on step functions, isometric pointwise group actions, normalized Hamming
concentration with an exact binomial route, and the event-containment
inequality behind the uniformity bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .metric import MetricSpace, PermutationIsometry, RationalLike, frac


class FiniteGroup:
    """Finite group on elements 0..k-1 given by its Cayley table."""

    def __init__(self, table: Sequence[Sequence[int]], names: Optional[Sequence[str]] = None):
        self.table = tuple(tuple(row) for row in table)
        self.k = len(self.table)
        for row in self.table:
            if len(row) != self.k or sorted(row) != list(range(self.k)):
                raise ValueError("each table row must be a permutation of the elements")
        ident = [e for e in range(self.k)
                 if all(self.table[e][b] == b and self.table[b][e] == b for b in range(self.k))]
        if len(ident) != 1:
            raise ValueError("table has no identity element")
        self.identity = ident[0]
        inv = [None] * self.k
        for a in range(self.k):
            for b in range(self.k):
                if self.table[a][b] == self.identity:
                    inv[a] = b
        if any(v is None for v in inv):
            raise ValueError("table has a non-invertible element")
        self.inverse = tuple(inv)
        if self.k <= 64:  # associativity is cubic; only guard small tables
            for a in range(self.k):
                for b in range(self.k):
                    for c in range(self.k):
                        if self.table[self.table[a][b]][c] != self.table[a][self.table[b][c]]:
                            raise ValueError(f"table is not associative at ({a},{b},{c})")
        self.names = tuple(names) if names is not None else tuple(str(i) for i in range(self.k))

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, a: int) -> int:
        return self.inverse[a]

    @classmethod
    def cyclic(cls, k: int) -> "FiniteGroup":
        return cls([[(a + b) % k for b in range(k)] for a in range(k)])

    @classmethod
    def from_permutations(cls, perms: Sequence[Sequence[int]]) -> "FiniteGroup":
        """Closure of the given permutations under composition."""
        perms = [tuple(p) for p in perms]
        deg = len(perms[0]) if perms else 1
        ident = tuple(range(deg))
        elems = [ident]
        index = {ident: 0}
        frontier = [ident]
        while frontier:
            nxt = []
            for p in frontier:
                for q in perms:
                    for prod in (tuple(p[i] for i in q), tuple(q[i] for i in p)):
                        if prod not in index:
                            index[prod] = len(elems)
                            elems.append(prod)
                            nxt.append(prod)
            frontier = nxt
        table = [[index[tuple(a[i] for i in b)] for b in elems] for a in elems]
        return cls(table, names=[",".join(map(str, p)) for p in elems])

    def __repr__(self) -> str:
        return f"FiniteGroup(order={self.k})"


class StepFunction:
    """Piecewise-constant map from [0,1) into a finite target.

    The target is a MetricSpace (values are point indices) or a
    FiniteGroup (values are element indices); intervals [t_i, t_{i+1})
    partition [0,1).
    """

    __slots__ = ("target", "cuts", "values")

    def __init__(self, target, cuts: Sequence[RationalLike], values: Sequence[int]):
        self.target = target
        self.cuts = tuple(frac(t) for t in cuts)
        self.values = tuple(int(v) for v in values)
        if len(self.cuts) < 2 or self.cuts[0] != 0 or self.cuts[-1] != 1:
            raise ValueError("breakpoints must run from 0 to 1")
        if any(self.cuts[i] >= self.cuts[i + 1] for i in range(len(self.cuts) - 1)):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.values) != len(self.cuts) - 1:
            raise ValueError("one value per interval required")
        size = target.n if isinstance(target, MetricSpace) else target.k
        for v in self.values:
            if not (0 <= v < size):
                raise ValueError(f"value {v} outside the target")

    @classmethod
    def constant(cls, target, value: int) -> "StepFunction":
        return cls(target, (0, 1), (value,))

    def pieces(self) -> list[tuple[Fraction, int]]:
        return [(self.cuts[i + 1] - self.cuts[i], self.values[i])
                for i in range(len(self.values))]

    def __repr__(self) -> str:
        return f"StepFunction({len(self.values)} pieces)"


def common_refinement(f: StepFunction, g: StepFunction) -> list[tuple[Fraction, int, int]]:
    """(length, value of f, value of g) over the joined breakpoints."""
    cuts = sorted(set(f.cuts) | set(g.cuts))
    out = []
    fi = gi = 0
    for a, b in zip(cuts, cuts[1:]):
        while f.cuts[fi + 1] <= a:
            fi += 1
        while g.cuts[gi + 1] <= a:
            gi += 1
        out.append((b - a, f.values[fi], g.values[gi]))
    return out


def me_lambda(f: StepFunction, g: StepFunction, lam: RationalLike = 1) -> Fraction:
    """Exact value of inf{eps > 0 : measure(pointwise distance > eps) < lam*eps}.

    The measure profile is a non-increasing step function of eps, so the
    condition set is an upward ray; its infimum is found by scanning the
    finitely many distance levels and solving the crossing exactly.
    """
    lam = frac(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if f.target is not g.target and f.target != g.target:
        raise ValueError("step functions map into different targets")
    if not isinstance(f.target, MetricSpace):
        raise TypeError("me_lambda needs a metric target")
    space = f.target
    mass: dict[Fraction, Fraction] = {}
    for length, a, b in common_refinement(f, g):
        dv = space.d(a, b)
        if dv > 0:
            mass[dv] = mass.get(dv, Fraction(0)) + length
    if not mass:
        return Fraction(0)
    levels = sorted(mass)
    # tail[i] = measure where distance > levels[i-1] on [levels[i-1], levels[i])
    intervals = []
    lo = Fraction(0)
    remaining = sum(mass.values())
    for v in levels:
        intervals.append((lo, v, remaining))
        remaining -= mass[v]
        lo = v
    intervals.append((lo, None, Fraction(0)))
    for a, b, m_val in intervals:
        c = m_val / lam
        if b is None or c < b:
            return a if a > c else c
    raise AssertionError("unreachable: the final interval always satisfies the condition")


@dataclass(frozen=True)
class ActionIsometryResult:
    equal: bool
    lhs: Fraction
    rhs: Fraction


class GroupAction:
    """Action of a finite group on a finite metric space by isometries,
    validated as a homomorphism into the isometry group."""

    def __init__(self, group: FiniteGroup, space: MetricSpace,
                 images: Sequence[PermutationIsometry]):
        if len(images) != group.k:
            raise ValueError("one isometry per group element required")
        self.group = group
        self.space = space
        self.images = tuple(images)
        for iso in self.images:
            if iso.space != space:
                raise ValueError("isometry acts on a different space")
        if not self.images[group.identity].is_identity():
            raise ValueError("identity element must act as the identity")
        for a in range(group.k):
            for b in range(group.k):
                left = self.images[group.mul(a, b)]
                right = self.images[a].compose(self.images[b])
                if left.images != right.images:
                    raise ValueError(f"not a homomorphism at ({a},{b})")

    def apply(self, element: int, point: int) -> int:
        return self.images[element](point)


def hm_action(action: GroupAction, g: StepFunction, f: StepFunction) -> StepFunction:
    """(g . f)(x) = g(x) . f(x), as a step function on the joined breakpoints."""
    if g.target is not action.group and g.target != action.group:
        raise ValueError("g must map into the acting group")
    if f.target != action.space:
        raise ValueError("f must map into the acted-on space")
    cuts = sorted(set(g.cuts) | set(f.cuts))
    values = []
    gi = fi = 0
    for a in cuts[:-1]:
        while g.cuts[gi + 1] <= a:
            gi += 1
        while f.cuts[fi + 1] <= a:
            fi += 1
        values.append(action.apply(g.values[gi], f.values[fi]))
    return StepFunction(action.space, cuts, values)


def hm_action_isometry_check(action: GroupAction, g: StepFunction,
                             f1: StepFunction, f2: StepFunction,
                             lam: RationalLike = 1) -> ActionIsometryResult:
    """Exact check that the pointwise action preserves the me_lambda metric."""
    lhs = me_lambda(hm_action(action, g, f1), hm_action(action, g, f2), lam)
    rhs = me_lambda(f1, f2, lam)
    return ActionIsometryResult(lhs == rhs, lhs, rhs)


@dataclass(frozen=True)
class HammingSample:
    """Product measure on Y^n for a finite base with rational weights."""
    n: int
    weights: tuple[Fraction, ...]
    seed: int = 0

    def __post_init__(self):
        ws = tuple(frac(w) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        if self.n < 1:
            raise ValueError("n must be positive")
        if any(w <= 0 for w in ws):
            raise ValueError("weights must be positive")
        if sum(ws) != 1:
            raise ValueError(f"weights sum to {sum(ws)}, expected 1")


@dataclass(frozen=True)
class ConcentrationReport:
    n: int
    threshold: int
    epsilon: Fraction
    shift: int
    samples: int
    mu_a_estimate: Fraction
    mu_a_eps_estimate: Fraction
    exact_mu_a: Optional[Fraction]
    exact_mu_a_eps: Optional[Fraction]
    oracle_bound: float


def binomial_tail(n: int, p: Fraction, k: int) -> Fraction:
    """P(Bin(n, p) <= k), exact."""
    if k < 0:
        return Fraction(0)
    k = min(k, n)
    q = 1 - p
    return sum(Fraction(math.comb(n, i)) * p ** i * q ** (n - i) for i in range(k + 1))


def hamming_concentration(hs: HammingSample, threshold: int, epsilon: RationalLike,
                          samples: int) -> ConcentrationReport:
    """Estimate (and for two-point bases compute exactly) the measures of a
    coordinate-sum threshold event and of its enlargement by ceil(eps*n)
    coordinate changes, against the standard bounded-differences oracle
    bound 1 - exp(-2 eps^2 n).

    The oracle bound is deliberately the textbook Gaussian form, used as an
    independent reference; the enlarged event is the threshold shifted by
    ceil(eps*n), which for a two-point base is the closed epsilon
    enlargement in normalized Hamming distance whenever eps*n is integral.
    """
    epsilon = frac(epsilon)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    shift = int(-((-epsilon * hs.n) // 1))  # ceil
    shifted = threshold + shift

    exact_a = exact_aeps = None
    if len(hs.weights) == 2:
        p1 = hs.weights[1]
        exact_a = binomial_tail(hs.n, p1, threshold)
        exact_aeps = binomial_tail(hs.n, p1, shifted)

    rng = np.random.default_rng(hs.seed)
    cum = np.cumsum([float(w) for w in hs.weights])[:-1]
    hits_a = hits_aeps = 0
    left = samples
    chunk = max(1, min(left, 4_000_000 // max(1, hs.n)))
    while left > 0:
        take = min(chunk, left)
        u = rng.random((take, hs.n))
        sums = np.searchsorted(cum, u).sum(axis=1)
        hits_a += int((sums <= threshold).sum())
        hits_aeps += int((sums <= shifted).sum())
        left -= take
    bound = 1.0 - math.exp(-2.0 * float(epsilon) ** 2 * hs.n)
    return ConcentrationReport(hs.n, threshold, epsilon, shift, samples,
                               Fraction(hits_a, samples), Fraction(hits_aeps, samples),
                               exact_a, exact_aeps, bound)


@dataclass(frozen=True)
class DominationResult:
    ok: bool
    lhs: Fraction  # measure of f(x) g(x)^-1 outside V
    rhs: Fraction  # measure of f(x) != g(x)


def uniformity_domination_check(f: StepFunction, g: StepFunction,
                                v: Iterable[int]) -> DominationResult:
    """measure{f g^-1 not in V} <= measure{f != g}: exact event containment
    check for group-valued step functions (0/1 word metric on the group)."""
    if f.target is not g.target and f.target != g.target:
        raise ValueError("step functions map into different groups")
    group = f.target
    if not isinstance(group, FiniteGroup):
        raise TypeError("uniformity domination applies to group-valued functions")
    vset = set(int(a) for a in v)
    if group.identity not in vset:
        raise ValueError("V must contain the identity")
    lhs = rhs = Fraction(0)
    for length, a, b in common_refinement(f, g):
        if group.mul(a, group.inv(b)) not in vset:
            lhs += length
        if a != b:
            rhs += length
    return DominationResult(lhs <= rhs, lhs, rhs)
