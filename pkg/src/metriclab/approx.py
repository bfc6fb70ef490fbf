"""Certified finite approximation of isometry families.

Pipeline: realize the orbit pseudometric of the free group on the given
isometries and basepoint-movers inside a lazily grown fragment, perturb it
to a left-invariant metric, project onto a finite permutation quotient,
take the quotient path metric of the weighted Cayley graph over the
radius-4 ball, perturb again, and certify the output family against the
input family by exact comparison.

The exact certificate is the acceptance authority: a candidate quotient is
kept only if the final deviation is within the requested epsilon.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappush, heappop
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .freegroup import (IDENTITY, Word, ball, ball_size, free_reduce, letter_key,
                        letters, word_inv, word_mul, word_str)
from .katetov import (ALWAYS_FRESH, PREFER_EXISTING, FragmentBudgetError,
                      KatetovFunction, UrysohnFragment, controlled_extension)
from .metric import (IndexedFamily, MetricSpace, PermutationIsometry,
                     RationalLike, EpsilonIsometryResult, epsilon_isometry_check, frac)

EDGE_RADIUS = 4  # Cayley generator set: all words of reduced length <= 4


class QuotientCapError(RuntimeError):
    pass


class QuotientSearchError(RuntimeError):
    pass


class CertificateError(RuntimeError):
    def __init__(self, message, achieved: Optional[Fraction] = None):
        super().__init__(message)
        self.achieved = achieved


# ---------------------------------------------------------------------------
# Orbit pseudometric


class OrbitMetric:
    """Table of d(w, e) over the radius-4 ball, realized by fragment orbits.

    ``base`` holds the unperturbed pseudometric values; ``value`` adds the
    epsilon/3 perturbation that turns it into a left-invariant metric.
    Pairs (u, v) are looked up through left-invariance as d(u^-1 v, e).
    """

    def __init__(self, rank: int, m: int, n: int, epsilon: Fraction,
                 words: Sequence[Word], base: Sequence[Fraction],
                 fragment: Optional[UrysohnFragment] = None,
                 word_points: Optional[Sequence[int]] = None, xi: Optional[int] = None):
        self.rank = rank
        self.m = m
        self.n = n
        self.epsilon = Fraction(epsilon)
        self.words = tuple(words)
        self.base = tuple(Fraction(v) for v in base)
        self.perturbation = self.epsilon / 3
        self.fragment = fragment
        self.word_points = tuple(word_points) if word_points is not None else None
        self.xi = xi
        self._index = {w: i for i, w in enumerate(self.words)}
        if self.words[0] != IDENTITY:
            raise ValueError("word table must start with the identity")
        if len(self.base) != len(self.words):
            raise ValueError("one value per word required")

    def base_value(self, w: Word) -> Fraction:
        return self.base[self._index[w]]

    def value(self, w: Word) -> Fraction:
        """Perturbed metric value d(w, e)."""
        v = self.base[self._index[w]]
        return v if w == IDENTITY else v + self.perturbation

    def pair(self, u: Word, v: Word) -> Fraction:
        """d(u, v) via left-invariance; both words must give u^-1 v in the table."""
        w = word_mul(word_inv(u), v)
        if w not in self._index:
            raise KeyError(f"{word_str(w)} outside the tabulated ball")
        return self.value(w)

    def edge_words(self) -> list[Word]:
        return [w for w in self.words if w != IDENTITY]


def _default_profile(space: MetricSpace) -> Fraction:
    """Constant admissible profile for the fresh basepoint: mid-range keeps
    the derived parameters tame.  Single-point spaces fall back to 1."""
    mp = space.min_positive()
    if mp is None:
        return Fraction(1)
    return max(space.diameter() / 2, mp)


def orbit_metric(space: MetricSpace, gens: Sequence[PermutationIsometry],
                 points: Sequence[int], epsilon: RationalLike, *,
                 budget: int = 10_000, xi_profile=None,
                 reuse: str = PREFER_EXISTING) -> OrbitMetric:
    """Realize the orbit pseudometric d(w, e) = d(w(xi), xi) for all words
    of length <= 4 over the m isometry generators and the n movers sending
    a fresh basepoint xi to each marked point.

    ``xi_profile`` fixes the basepoint's distance profile: a rational for
    the constant profile (default: max of half-diameter and minimal
    positive distance), or any admissible KatetovFunction on the space.
    """
    epsilon = frac(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    m, n = len(gens), len(points)
    if n < 1:
        raise ValueError("at least one marked point is required")
    if space.n < 1:
        raise ValueError("the space must have at least one point")
    for g in gens:
        if g.space != space:
            raise ValueError("generator acts on a different space")
    for p in points:
        if not (0 <= p < space.n):
            raise ValueError(f"marked point {p} outside the space")
    rank = m + n

    frag = UrysohnFragment(space, budget=budget, reuse=reuse)
    if isinstance(xi_profile, KatetovFunction):
        if xi_profile.space != space:
            raise ValueError("profile lives on a different space")
        if any(v == 0 for v in xi_profile.values):
            raise ValueError("profile must be positive (xi is a fresh point)")
        profile = xi_profile
    else:
        c = frac(xi_profile) if xi_profile is not None else _default_profile(space)
        if space.n >= 2 and c < space.diameter() / 2:
            raise ValueError(f"profile constant {c} below half-diameter; inadmissible")
        if c <= 0:
            raise ValueError("profile constant must be positive")
        profile = controlled_extension(space, range(space.n), [c] * space.n)
    xi = frag.add_point(profile, label="xi")
    for g in gens:
        frag.add_generator({i: g(i) for i in range(space.n)})
    for i, p in enumerate(points):
        frag.add_generator({xi: p})

    words = ball(rank, EDGE_RADIUS)
    point_of: dict[Word, int] = {IDENTITY: xi}
    base: list[Fraction] = []
    for w in words:
        if w == IDENTITY:
            base.append(Fraction(0))
            continue
        prev = point_of[w[1:]]
        a = w[0]
        gen_index = abs(a) - 1
        direction = "forward" if a > 0 else "inverse"
        try:
            pt = frag.apply(gen_index, prev, direction)
        except FragmentBudgetError as e:
            raise FragmentBudgetError(
                f"fragment budget exhausted while evaluating {word_str(w)}",
                offending=w) from e
        point_of[w] = pt
        base.append(frag.space.d(pt, xi))

    om = OrbitMetric(rank, m, n, epsilon, words, base, frag,
                     [point_of[w] for w in words], xi)
    return om


@dataclass(frozen=True)
class ApproxParameters:
    delta: Fraction
    Delta: Fraction
    N: int


def parameters(om: OrbitMetric) -> ApproxParameters:
    """delta = min, Delta = max of the perturbed metric over distinct pairs
    of the radius-2 ball (equivalently over the radius-4 ball at identity);
    N = 4*floor(Delta/delta) + 4."""
    vals = [om.value(w) for w in om.edge_words()]
    delta, Delta = min(vals), max(vals)
    n = 4 * math.floor(Fraction(Delta, delta) if delta else 0) + 4
    return ApproxParameters(delta, Delta, int(n))


# ---------------------------------------------------------------------------
# Finite permutation quotients


def _compose(p: tuple, q: tuple) -> tuple:
    """(p . q)(x) = p(q(x))"""
    return tuple(p[i] for i in q)


def _invert(p: tuple) -> tuple:
    inv = [0] * len(p)
    for i, v in enumerate(p):
        inv[v] = i
    return tuple(inv)


class _Materialized:
    """Closure of the generator permutations: the quotient group itself."""

    def __init__(self, elements: list[tuple], index: dict, reps: list[Word]):
        self.elements = elements
        self.index = index
        self.reps = reps
        self.order = len(elements)
        self._inv = None

    def inverse_index(self, i: int) -> int:
        if self._inv is None:
            self._inv = [self.index[_invert(p)] for p in self.elements]
        return self._inv[i]


class PermutationQuotient:
    """Finite quotient of the free group realized by permutations.

    Holds one permutation per generator; the element set (the group
    itself) is materialized on demand, subject to a cap.
    """

    def __init__(self, rank: int, gen_perms: Sequence[Sequence[int]]):
        if len(gen_perms) != rank:
            raise ValueError(f"{len(gen_perms)} permutations for rank {rank}")
        perms = [tuple(p) for p in gen_perms]
        if not perms:
            raise ValueError("rank must be at least 1")
        degree = len(perms[0])
        for p in perms:
            if len(p) != degree or sorted(p) != list(range(degree)):
                raise ValueError("generator images must be permutations of a common set")
        self.rank = rank
        self.degree = degree
        self.gen_perms = tuple(perms)
        self._letter = {}
        for i, p in enumerate(self.gen_perms, start=1):
            self._letter[i] = p
            self._letter[-i] = _invert(p)
        self._mat: Optional[_Materialized] = None
        self._mat_cap = 0

    def letter_perm(self, a: int) -> tuple:
        return self._letter[a]

    def word_perm(self, w: Word) -> tuple:
        p = tuple(range(self.degree))
        for a in reversed(w):
            p = _compose(self._letter[a], p)
        return p

    def materialize(self, cap: int = 1_000_000) -> _Materialized:
        """BFS closure over right multiplication by generators, identity
        first; raises QuotientCapError beyond the cap."""
        if self._mat is not None and self._mat_cap >= cap:
            return self._mat
        if self._mat is not None:
            return self._mat
        ident = tuple(range(self.degree))
        elements = [ident]
        index = {ident: 0}
        reps: list[Word] = [IDENTITY]
        alphabet = sorted(letters(self.rank), key=letter_key)
        frontier = [0]
        while frontier:
            nxt = []
            for ei in frontier:
                cur = elements[ei]
                for a in alphabet:
                    prod = _compose(cur, self._letter[a])
                    if prod not in index:
                        if len(elements) >= cap:
                            raise QuotientCapError(
                                f"quotient closure exceeds cap {cap}")
                        index[prod] = len(elements)
                        elements.append(prod)
                        reps.append(word_mul(reps[ei], (a,)))
                        nxt.append(index[prod])
            frontier = nxt
        self._mat = _Materialized(elements, index, reps)
        self._mat_cap = cap
        return self._mat

    @property
    def order(self) -> int:
        return self.materialize().order


@dataclass(frozen=True)
class KernelCheckResult:
    ok: bool
    first_killed: Optional[Word]
    words_checked: int


def kernel_scan(q: PermutationQuotient, max_radius: int,
                word_budget: Optional[int] = None) -> tuple[int, Optional[Word], int]:
    """Largest L <= max_radius with no nontrivial word of length <= L in the
    kernel, plus the first killed word (shortest, canonical order).

    Scans lengths in increasing order so the reported word is minimal.
    """
    ident = tuple(range(q.degree))
    alphabet = sorted(letters(q.rank), key=letter_key)
    checked = 0
    for length in range(1, max_radius + 1):
        if word_budget is not None and checked + ball_size(q.rank, length) - 1 > word_budget:
            return length - 1, None, checked
        # DFS over words of exactly `length`
        stack = [((), ident)]
        found = None
        while stack and found is None:
            w, p = stack.pop()
            if len(w) == length:
                checked += 1
                if p == ident:
                    found = w
                continue
            last = w[-1] if w else 0
            for a in reversed(alphabet):
                if a != -last:
                    stack.append((w + (a,), _compose(p, q.letter_perm(a))))
        if found is not None:
            return length - 1, found, checked
    return max_radius, None, checked


def kernel_check(q: PermutationQuotient, radius: int,
                 word_budget: Optional[int] = None) -> KernelCheckResult:
    """Verify no nontrivial reduced word of length <= radius maps to the
    identity permutation."""
    free, killed, checked = kernel_scan(q, radius, word_budget)
    if killed is None and free < radius:
        raise QuotientSearchError(
            f"kernel check to radius {radius} exceeds the word budget")
    return KernelCheckResult(free >= radius, killed, checked)


def _cyclic_quotient(k: int) -> PermutationQuotient:
    shift = tuple((i + 1) % k for i in range(k))
    return PermutationQuotient(1, [shift])


def build_quotient(rank: int, radius: int, strategy, *, cap: int = 1_000_000,
                   seed: int = 0, word_budget: int = 200_000) -> PermutationQuotient:
    """A finite quotient whose kernel meets the radius ball trivially.

    ``ball_perm``: generators act on the ball by left multiplication where
    defined, completed to permutations in canonical order; kernel-free up
    to the radius by the basepoint-orbit argument.  ``random_search``:
    sampled generator permutations of a small set, verified, retried.
    The element closure is materialized lazily (on first use) so that
    large-degree certificates remain available even when the closure
    would exceed the cap.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if strategy == "ball_perm":
        if rank == 1:
            return _cyclic_quotient(2 * radius + 1)
        if ball_size(rank, radius) > word_budget:
            raise QuotientSearchError(
                f"ball({radius}) over {rank} generators has {ball_size(rank, radius)} "
                f"words, beyond the budget {word_budget}")
        b = ball(rank, radius)
        index = {w: i for i, w in enumerate(b)}
        perms = []
        for g in range(1, rank + 1):
            images: list[Optional[int]] = [None] * len(b)
            taken = [False] * len(b)
            for i, w in enumerate(b):
                tgt = word_mul((g,), w)
                j = index.get(tgt)
                if j is not None:
                    images[i] = j
                    taken[j] = True
            free_targets = iter(j for j in range(len(b)) if not taken[j])
            for i in range(len(b)):
                if images[i] is None:
                    images[i] = next(free_targets)
            perms.append(tuple(images))
        return PermutationQuotient(rank, perms)
    if isinstance(strategy, tuple) and strategy and strategy[0] == "random_search":
        _, degree, attempts = strategy
        rng = random.Random(seed)
        last_fail = None
        for _ in range(attempts):
            perms = [tuple(rng.sample(range(degree), degree)) for _ in range(rank)]
            q = PermutationQuotient(rank, perms)
            res = kernel_check(q, radius, word_budget)
            if res.ok:
                return q
            last_fail = res.first_killed
        raise QuotientSearchError(
            f"no kernel-free quotient of degree {degree} in {attempts} attempts "
            f"(last killed word: {word_str(last_fail) if last_fail else 'n/a'})")
    raise ValueError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Quotient path metric


class _QuotientGeometry:
    """Weighted Cayley graph of a materialized quotient over the projected
    radius-4 ball, with exact integer-scaled Dijkstra.

    Edge targets from a vertex are computed on demand (one vectorized
    composition per popped vertex) instead of materializing the full
    right-multiplication table.
    """

    def __init__(self, q: PermutationQuotient, om: OrbitMetric, cap: int):
        self.q = q
        self.om = om
        self.mat = q.materialize(cap)
        # project edge words, keeping the cheapest word per quotient element
        weight_of: dict[int, Fraction] = {}
        perm_memo: dict[Word, tuple] = {IDENTITY: tuple(range(q.degree))}
        ident_idx = 0
        for w in om.words:
            if w == IDENTITY:
                continue
            p = _compose(q.letter_perm(w[0]), perm_memo[w[1:]])
            perm_memo[w] = p
            h = self.mat.index[p]
            if h == ident_idx:
                continue  # kernel word: no edge, the classes merge instead
            val = om.value(w)
            if h not in weight_of or val < weight_of[h]:
                weight_of[h] = val
        self.edge_targets = sorted(weight_of)
        weights = [weight_of[h] for h in self.edge_targets]
        self.scale = math.lcm(*(v.denominator for v in weights)) if weights else 1
        self.weights_scaled = np.array(
            [int(v * self.scale) for v in weights], dtype=np.int64)
        # symmetry of the weight table (d(a,e) = d(a^-1,e)); the min is a
        # safety net, asserted here
        inv_w = {}
        for h, v in weight_of.items():
            inv_w.setdefault(frozenset((h, self.mat.inverse_index(h))), set()).add(v)
        assert all(len(vs) == 1 for vs in inv_w.values()), "asymmetric edge weights"

        order, degree = self.mat.order, q.degree
        self._elems = np.array(self.mat.elements, dtype=np.int64).reshape(order, degree)
        self._edge_perms = np.array([self.mat.elements[h] for h in self.edge_targets],
                                    dtype=np.int64).reshape(len(self.edge_targets), degree)
        if degree <= 15:
            self._radix = np.power(np.int64(degree), np.arange(degree, dtype=np.int64))
            codes = self._elems @ self._radix
            self._sort_idx = np.argsort(codes, kind="stable")
            self._sorted_codes = codes[self._sort_idx]
        else:
            self._radix = None

    def _edge_columns(self, u: int) -> np.ndarray:
        """Indices of u . h for every edge class h."""
        if self._radix is not None:
            prods = self._elems[u][self._edge_perms]  # (A, degree)
            pos = np.searchsorted(self._sorted_codes, prods @ self._radix)
            return self._sort_idx[pos]
        row = self.mat.elements[u]
        return np.array([self.mat.index[_compose(row, self.mat.elements[h])]
                         for h in self.edge_targets], dtype=np.int64)

    def dijkstra(self, source: int, targets: Optional[Iterable[int]] = None) -> np.ndarray:
        """Scaled-integer shortest paths from one element; exact.

        Stops early once all requested targets are settled.
        """
        order = self.mat.order
        INF = np.iinfo(np.int64).max
        dist = np.full(order, INF, dtype=np.int64)
        dist[source] = 0
        want = set(targets) if targets is not None else None
        settled = np.zeros(order, dtype=bool)
        heap = [(0, source)]
        remaining = len(want) if want is not None else order
        while heap and remaining > 0:
            d, u = heappop(heap)
            if settled[u]:
                continue
            settled[u] = True
            if want is None or u in want:
                remaining -= 1
            tg = self._edge_columns(u)
            cand = d + self.weights_scaled
            better = cand < dist[tg]
            if better.any():
                bt, bc = tg[better], cand[better]
                np.minimum.at(dist, bt, bc)
                for t in np.unique(bt):
                    heappush(heap, (int(dist[t]), int(t)))
        return dist

    def rho_bar(self, u_idx: int, v_idx: int, row0: np.ndarray) -> Fraction:
        """rho from a precomputed identity row, via left invariance."""
        t = self.mat.index[_compose(
            self.mat.elements[self.mat.inverse_index(u_idx)], self.mat.elements[v_idx])]
        return Fraction(int(row0[t]), self.scale)

    def element_of_word(self, w: Word) -> int:
        return self.mat.index[self.q.word_perm(w)]


def quotient_metric(q: PermutationQuotient, om: OrbitMetric, epsilon: RationalLike,
                    *, cap: int = 1_000_000, full_cap: int = 400) -> MetricSpace:
    """The full finite metric space on the quotient's elements: quotient
    path metric of the weighted Cayley graph plus the epsilon/3 off-diagonal
    perturbation.  Guarded by ``full_cap``; the pipeline itself only ever
    materializes the rows it needs."""
    epsilon = frac(epsilon)
    geo = _QuotientGeometry(q, om, cap)
    order = geo.mat.order
    if order > full_cap:
        raise QuotientCapError(
            f"quotient has {order} elements; full matrix capped at {full_cap}")
    row0 = geo.dijkstra(0)
    pert = epsilon / 3
    rows = [[Fraction(0)] * order for _ in range(order)]
    for u in range(order):
        for v in range(order):
            if u == v:
                continue
            rows[u][v] = geo.rho_bar(u, v, row0) + pert
    labels = [word_str(w) for w in geo.mat.reps]
    return MetricSpace(rows, labels, _checked=True)


def quotient_pair_distances(q: PermutationQuotient, om: OrbitMetric,
                            epsilon: RationalLike, word_pairs: Sequence[tuple[Word, Word]],
                            *, cap: int = 1_000_000,
                            perturb: bool = True) -> dict[tuple[Word, Word], Fraction]:
    """Exact quotient metric values for selected pairs of words, without
    materializing the full matrix."""
    epsilon = frac(epsilon)
    geo = _QuotientGeometry(q, om, cap)
    targets = set()
    idx_pairs = []
    for u, v in word_pairs:
        ui, vi = geo.element_of_word(u), geo.element_of_word(v)
        t = geo.mat.index[_compose(
            geo.mat.elements[geo.mat.inverse_index(ui)], geo.mat.elements[vi])]
        targets.add(t)
        idx_pairs.append((u, v, ui, vi, t))
    row0 = geo.dijkstra(0, targets)
    out = {}
    pert = epsilon / 3 if perturb else Fraction(0)
    for u, v, ui, vi, t in idx_pairs:
        if ui == vi:
            out[(u, v)] = Fraction(0)
        else:
            out[(u, v)] = Fraction(int(row0[t]), geo.scale) + pert
    return out


# ---------------------------------------------------------------------------
# Candidate quotients for the end-to-end pipeline


def _extend_perm(images: Sequence[int], degree: int) -> tuple:
    out = list(images) + list(range(len(images), degree))
    return tuple(out)


def _swap(degree: int, a: int, b: int) -> tuple:
    p = list(range(degree))
    p[a], p[b] = p[b], p[a]
    return tuple(p)


def _cycle(degree: int, pts: Sequence[int]) -> tuple:
    p = list(range(degree))
    for i, a in enumerate(pts):
        p[a] = pts[(i + 1) % len(pts)]
    return tuple(p)


def _gen_subgroup(perms: list[tuple], cap: int = 2_000) -> list[tuple]:
    ident = tuple(range(len(perms[0]))) if perms else ()
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for p in frontier:
            for g in perms:
                for qq in (_compose(p, g), _compose(p, _invert(g))):
                    if qq not in seen:
                        if len(seen) >= cap:
                            return sorted(seen)
                        seen.add(qq)
                        nxt.append(qq)
        frontier = nxt
    return sorted(seen)


def _restricted_completion(om: OrbitMetric, limit: int,
                           rng: Optional[random.Random] = None) -> list[tuple]:
    """Complete the fragment's partial isometries, restricted to its first
    `limit` points, to permutations of that window.

    Recorded pairs inside the window are kept verbatim, so the quotient
    mirrors the realized orbit: words that stabilize the basepoint in the
    fragment keep stabilizing its slot here.  Unmatched points are paired
    canonically, or shuffled when an rng is supplied.
    """
    perms = []
    for iso in om.fragment.generators:
        pairs = {p: q for p, q in iso.fwd.items() if p < limit and q < limit}
        used = set(pairs.values())
        free = [t for t in range(limit) if t not in used]
        if rng is not None:
            rng.shuffle(free)
        it = iter(free)
        perms.append(tuple(pairs[p] if p in pairs else next(it) for p in range(limit)))
    return perms


def _auto_candidates(om: OrbitMetric, space: MetricSpace,
                     gens: Sequence[PermutationIsometry], points: Sequence[int],
                     seed: int, max_candidates: int):
    """Deterministic stream of candidate quotients for the certificate gate.

    Fragment-restricted completions come first: they reproduce the realized
    orbit exactly on a window around the seed space, so cheap words (those
    stabilizing the basepoint) stay harmless in the quotient.  Blind
    action-based completions and random permutations widen the search.
    """
    m, n = len(gens), len(points)
    rank = m + n
    rng = random.Random(seed)
    emitted = 0
    seen: set[tuple] = set()

    def cand(desc, perms):
        nonlocal emitted
        key = tuple(perms)
        if key in seen:
            return None
        seen.add(key)
        emitted += 1
        return desc, PermutationQuotient(rank, perms)

    if rank == 1:
        for k in (9, 33, 129, 513, 2049):
            c = cand(f"cyclic-{k}", [_cycle(k, range(k))])
            if c:
                yield c
        return

    frag_n = om.fragment.space.n
    limits = [l for l in range(space.n + 1, min(frag_n, space.n + 6) + 1)]

    for limit in limits:
        c = cand(f"fragment-window-{limit}", _restricted_completion(om, limit))
        if c:
            yield c
        if emitted >= max_candidates:
            return
    for v in range(3):
        for limit in limits:
            c = cand(f"fragment-window-{limit}-shuffled-{v}",
                     _restricted_completion(om, limit, rng))
            if c:
                yield c
            if emitted >= max_candidates:
                return

    base_deg = space.n + 1
    xi_slot = space.n
    g_perms = [_extend_perm(g.images, base_deg) for g in gens]
    g0 = _gen_subgroup(g_perms) if gens else [tuple(range(base_deg))]

    c = cand("action-swap", g_perms + [_swap(base_deg, xi_slot, p) for p in points])
    if c:
        yield c
    if emitted >= max_candidates:
        return
    for v in range(4):
        taus = [g0[rng.randrange(len(g0))] for _ in points]
        s_var = [_compose(_swap(base_deg, xi_slot, p), t) for p, t in zip(points, taus)]
        c = cand(f"action-swap-twist-{v}", g_perms + s_var)
        if c:
            yield c
        if emitted >= max_candidates:
            return

    deg2 = space.n + 2
    phantom = space.n + 1
    g2 = [_extend_perm(g.images, deg2) for g in gens]
    c = cand("action-3cycle", g2 + [_cycle(deg2, (xi_slot, p, phantom)) for p in points])
    if c:
        yield c
    if emitted >= max_candidates:
        return

    for degree in (base_deg + 1, base_deg + 2, 7, 8):
        for v in range(4):
            perms = [tuple(rng.sample(range(degree), degree)) for _ in range(rank)]
            c = cand(f"random-deg{degree}-{v}", perms)
            if c:
                yield c
            if emitted >= max_candidates:
                return


def _strategy_candidates(strategy, om, space, gens, points, params, seed, budgets):
    rank = len(gens) + len(points)
    if strategy == "auto":
        yield from _auto_candidates(om, space, gens, points, seed, budgets.candidates)
        return
    if strategy == "ball":
        radius = params.N
        while radius > 0 and ball_size(rank, radius) > budgets.kernel_words:
            radius -= 1
        yield (f"ball_perm-{radius}",
               build_quotient(rank, radius, "ball_perm", seed=seed,
                              word_budget=budgets.kernel_words))
        return
    if isinstance(strategy, tuple) and strategy and strategy[0] == "random_search":
        _, degree, attempts = strategy
        rng = random.Random(seed)
        for a in range(attempts):
            perms = [tuple(rng.sample(range(degree), degree)) for _ in range(rank)]
            yield f"search-deg{degree}-{a}", PermutationQuotient(rank, perms)
        return
    raise ValueError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# End-to-end pipeline


@dataclass
class Budgets:
    fragment_points: int = 10_000
    quotient_cap: int = 1_000_000     # hard cap on materialized group order
    order_cap: int = 8_000            # largest group the path metric will walk
    kernel_words: int = 30_000        # word budget for kernel scans
    candidates: int = 40
    full_space_cap: int = 120         # emit the full output space up to this order


def family_words(m: int, n: int) -> dict:
    """Index -> word of the compared family: (j, i) -> g_j g_{m+i}, or the
    bare movers when there are no isometries."""
    if m == 0:
        return {i: (m + i,) for i in range(1, n + 1)}
    return {(j, i): free_reduce((j, m + i)) for j in range(1, m + 1) for i in range(1, n + 1)}


def original_family(space: MetricSpace, gens: Sequence[PermutationIsometry],
                    points: Sequence[int]) -> IndexedFamily:
    m, n = len(gens), len(points)
    if m == 0:
        return IndexedFamily(space, {i: points[i - 1] for i in range(1, n + 1)})
    return IndexedFamily(space, {(j, i): gens[j - 1](points[i - 1])
                                 for j in range(1, m + 1) for i in range(1, n + 1)})


def certify(original: IndexedFamily, result, epsilon: RationalLike) -> EpsilonIsometryResult:
    """Exact indexed-family comparison; shares only the metric core with
    the pipeline it checks."""
    if isinstance(result, ApproximationResult):
        result = result.family
    return epsilon_isometry_check(original, result, epsilon)


@dataclass
class ApproximationResult:
    success: bool
    epsilon_requested: Fraction
    epsilon_achieved: Fraction
    certificate: EpsilonIsometryResult
    family: IndexedFamily            # output family with exact quotient distances
    marked: dict                     # i -> coset representative word string
    space: Optional[MetricSpace]     # full output space when small enough
    translations: Optional[list[PermutationIsometry]]  # left translations g~_j
    provenance: dict

    def report(self) -> dict:
        prov = dict(self.provenance)
        out = {
            "success": self.success,
            "epsilon_requested": self.epsilon_requested,
            "epsilon_achieved": self.epsilon_achieved,
            "certificate_deviation": self.certificate.max_deviation,
            "marked_points": {str(k): v for k, v in self.marked.items()},
            "provenance": prov,
        }
        return out


def approximate_isometries(space: MetricSpace, gens: Sequence[PermutationIsometry],
                           points: Sequence[int], epsilon: RationalLike, *,
                           strategy="auto", seed: int = 0,
                           budgets: Optional[Budgets] = None,
                           best_effort: bool = False,
                           xi_profile: Optional[RationalLike] = None,
                           reuse: str = PREFER_EXISTING) -> ApproximationResult:
    """Produce a finite metric space, marked points and isometries whose
    indexed family is epsilon-isometric to {g_j x_i}, certified exactly.

    Candidates are consumed in canonical order and the first one whose
    certificate passes wins, so the result depends only on inputs and
    seed.  Without ``best_effort`` a certificate miss raises; with it the
    best achieved deviation is reported honestly.
    """
    epsilon = frac(epsilon)
    budgets = budgets or Budgets()
    m, n = len(gens), len(points)
    fam_words = family_words(m, n)
    original = original_family(space, gens, points)

    if xi_profile is not None:
        profiles = [("given", xi_profile)]
    else:
        # the constant mid-range profile first, then profiles anchored at
        # each marked point (fewer accidental coincidences when the space
        # sits awkwardly on its own distance grid)
        profiles = [("constant", None)]
        c0 = _default_profile(space)
        for p in dict.fromkeys(points):
            profiles.append((f"anchored-{p}",
                             controlled_extension(space, [p], [c0])))

    best: Optional[ApproximationResult] = None
    for profile_name, prof in profiles:
        om = orbit_metric(space, gens, points, epsilon,
                          budget=budgets.fragment_points, xi_profile=prof,
                          reuse=reuse)
        params = parameters(om)
        feasible_n = 0
        while (feasible_n < params.N
               and ball_size(om.rank, feasible_n + 1) <= budgets.kernel_words):
            feasible_n += 1

        pool = []
        for idx, (desc, q) in enumerate(_strategy_candidates(
                strategy, om, space, gens, points, params, seed, budgets)):
            if idx >= budgets.candidates:
                break
            try:
                q.materialize(min(budgets.quotient_cap, budgets.order_cap))
            except QuotientCapError:
                continue
            pool.append((q.order, idx, desc, q))
        pool.sort(key=lambda t: (t[0], t[1]))  # cheap quotients first, stable

        for _, tried, desc, q in pool:
            geo = _QuotientGeometry(q, om, budgets.quotient_cap)
            free_level, first_killed, _ = kernel_scan(q, feasible_n,
                                                      budgets.kernel_words)

            cosets = {idx: geo.element_of_word(w) for idx, w in fam_words.items()}
            unique = sorted(set(cosets.values()))
            pos = {c: i for i, c in enumerate(unique)}
            targets = set()
            diff_of = {}
            for a, b in itertools.combinations(unique, 2):
                t = geo.mat.index[_compose(
                    geo.mat.elements[geo.mat.inverse_index(a)], geo.mat.elements[b])]
                targets.add(t)
                diff_of[(a, b)] = t
            row0 = geo.dijkstra(0, targets) if targets else None
            pert = epsilon / 3
            rows = [[Fraction(0)] * len(unique) for _ in unique]
            for (a, b), t in diff_of.items():
                val = Fraction(int(row0[t]), geo.scale) + pert
                rows[pos[a]][pos[b]] = val
                rows[pos[b]][pos[a]] = val
            fam_space = MetricSpace(rows, [word_str(geo.mat.reps[c]) for c in unique])
            result_family = IndexedFamily(fam_space,
                                          {idx: pos[c] for idx, c in cosets.items()})
            cert = certify(original, result_family, epsilon)

            prov = {
                "m": m, "n": n, "rank": om.rank,
                "delta": params.delta, "Delta": params.Delta,
                "N_formula": params.N, "N_checked": feasible_n,
                "kernel_free_level": free_level,
                "first_killed": word_str(first_killed) if first_killed else None,
                "strategy": desc, "profile": profile_name, "candidate_index": tried,
                "quotient_degree": q.degree, "quotient_order": q.order,
                "fragment_points": om.fragment.space.n if om.fragment else None,
                "seed": seed,
            }
            marked = {i: word_str(free_reduce((m + i,))) for i in range(1, n + 1)}
            res = ApproximationResult(cert.ok, epsilon, cert.max_deviation, cert,
                                      result_family, marked, None, None, prov)
            if cert.ok:
                if q.order <= budgets.full_space_cap:
                    full = quotient_metric(q, om, epsilon, cap=budgets.quotient_cap,
                                           full_cap=budgets.full_space_cap)
                    res.space = full
                    res.translations = [
                        _left_translation(geo, j, full) for j in range(1, m + 1)]
                return res
            if best is None or res.epsilon_achieved < best.epsilon_achieved:
                best = res

    if best_effort and best is not None:
        return best
    achieved = best.epsilon_achieved if best else None
    raise CertificateError(
        f"no candidate quotient certified within epsilon = {epsilon}"
        + (f"; best deviation {achieved}" if achieved is not None else ""),
        achieved)


def _left_translation(geo: _QuotientGeometry, j: int, full: MetricSpace) -> PermutationIsometry:
    """g~_j: left multiplication by pi(g_j) on the materialized elements."""
    mat = geo.mat
    gp = geo.q.letter_perm(j)
    images = [mat.index[_compose(gp, p)] for p in mat.elements]
    return PermutationIsometry(full, tuple(images))
