"""Finite verification and refutation of the metric Ramsey property
R(F, G, m, epsilon), in embedding and subspace modes, plus the flip
coloring and the finite cover form of the Ramsey-Dvoretzky-Milman check."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .metric import (Embedding, IndexedFamily, MetricSpace, PermutationIsometry,
                     RationalLike, enumerate_embeddings, frac, isometry_group)


class EmbeddingSpace:
    """All isometric embeddings of F into X with the sup metric
    d_sup(i, j) = max over x in F of d(i(x), j(x))."""

    def __init__(self, f: MetricSpace, x: MetricSpace,
                 embeddings: Optional[Sequence[Embedding]] = None):
        self.f = f
        self.x = x
        self.embeddings = tuple(embeddings) if embeddings is not None \
            else tuple(enumerate_embeddings(f, x))
        self._pos = {e.images: i for i, e in enumerate(self.embeddings)}

    def __len__(self) -> int:
        return len(self.embeddings)

    def index(self, e: Embedding) -> int:
        try:
            return self._pos[e.images]
        except KeyError:
            raise ValueError("embedding does not belong to this space") from None

    def d_sup(self, i: int, j: int) -> Fraction:
        a, b = self.embeddings[i].images, self.embeddings[j].images
        if not a:
            return Fraction(0)
        return max(self.x.d(a[k], b[k]) for k in range(len(a)))

    def as_metric_space(self) -> MetricSpace:
        n = len(self.embeddings)
        rows = [[self.d_sup(i, j) for j in range(n)] for i in range(n)]
        return MetricSpace(rows, [f"e{i}" for i in range(n)])


def embedding_ball(es: EmbeddingSpace, center: Embedding, epsilon: RationalLike) -> list[Embedding]:
    """Embeddings within sup distance <= epsilon of the center (inclusive)."""
    epsilon = frac(epsilon)
    c = es.index(center)
    return [e for i, e in enumerate(es.embeddings) if es.d_sup(c, i) <= epsilon]


@dataclass(frozen=True)
class Coloring:
    """Total color assignment on a domain of given size, colors in 0..m-1."""
    size: int
    colors: tuple[int, ...]

    def __post_init__(self):
        if len(self.colors) != self.size:
            raise ValueError("coloring must be total on the domain")


@dataclass
class RamseyVerdict:
    f: MetricSpace
    g: MetricSpace
    x: MetricSpace
    m: int
    epsilon: Fraction
    mode: str
    verdict: bool
    conclusive: bool
    witness_embedding: Optional[Embedding]   # a good copy of G (positive direction)
    witness_coloring: Optional[Coloring]     # a bad coloring (refutation)
    colorings_examined: int
    embeddings_examined: int
    note: str = ""


class _Domain:
    """The colored objects: F-embeddings, or their subspace classes, with
    the neighbourhood metric used by 'monochromatic up to epsilon'."""

    def __init__(self, f: MetricSpace, x: MetricSpace, mode: str):
        self.mode = mode
        self.space = EmbeddingSpace(f, x)
        if mode == "embeddings":
            self.items = list(range(len(self.space)))
            self._class_of = {i: i for i in self.items}
        elif mode == "subspaces":
            by_image: dict[frozenset, list[int]] = {}
            for i, e in enumerate(self.space.embeddings):
                by_image.setdefault(frozenset(e.images), []).append(i)
            self.classes = [tuple(v) for _, v in sorted(by_image.items(),
                                                        key=lambda kv: sorted(kv[0]))]
            self.items = list(range(len(self.classes)))
            self._class_of = {}
            for ci, members in enumerate(self.classes):
                for i in members:
                    self._class_of[i] = ci
        else:
            raise ValueError(f"mode must be 'embeddings' or 'subspaces', got {mode!r}")

    def __len__(self) -> int:
        return len(self.items)

    def item_of_embedding(self, emb_index: int) -> int:
        return self._class_of[emb_index]

    def dist(self, a: int, b: int) -> Fraction:
        if self.mode == "embeddings":
            return self.space.d_sup(a, b)
        # quotient of d_sup by reindexings of F: min over representatives
        i0 = self.classes[a][0]
        return min(self.space.d_sup(i0, j) for j in self.classes[b])

    def balls(self, epsilon: Fraction) -> list[tuple[int, ...]]:
        n = len(self.items)
        return [tuple(b for b in range(n) if self.dist(a, b) <= epsilon)
                for a in range(n)]


def _through(domain: _Domain, j: Embedding, fg: Sequence[Embedding]) -> list[int]:
    """Domain items of the F-embeddings factoring through j: G -> X."""
    out = []
    for k in fg:
        images = tuple(j.images[t] for t in k.images)
        out.append(domain.item_of_embedding(domain.space._pos[images]))
    return sorted(set(out))


def _monochromatic_up_to(colors: Sequence[int], items: Sequence[int],
                         balls: Sequence[tuple[int, ...]], m: int) -> bool:
    """Is the item set inside the epsilon-neighbourhood of one color class?"""
    for c in range(m):
        if all(any(colors[b] == c for b in balls[t]) for t in items):
            return True
    return False


def check_R(f: MetricSpace, g: MetricSpace, x: MetricSpace, m: int,
            epsilon: RationalLike, mode: str = "embeddings",
            search: str = "exhaustive", *, exhaustive_bound: int = 2 ** 25,
            seed: int = 0, iterations: int = 300) -> RamseyVerdict:
    """Decide (or refute) the property: every m-coloring of the F-embeddings
    of X admits a copy of G through which all F-embeddings are
    monochromatic up to epsilon.

    Vacuous conventions: no F-embedding in X gives True, no G-embedding
    gives False.  Exhaustive search is refused beyond the configured bound;
    adversarial search is a seeded hill-climb that can only return verified
    refutations or an inconclusive positive.
    """
    epsilon = frac(epsilon)
    if m < 1:
        raise ValueError("need at least one color")
    e_g = enumerate_embeddings(g, x)
    domain = _Domain(f, x, mode)
    if len(domain) == 0:
        return RamseyVerdict(f, g, x, m, epsilon, mode, True, True, None, None, 0, 0,
                             note="vacuous: F does not embed into X")
    if not e_g:
        return RamseyVerdict(f, g, x, m, epsilon, mode, False, True, None, None, 0, 0,
                             note="vacuous: G does not embed into X")
    fg = enumerate_embeddings(f, g)
    through = [_through(domain, j, fg) for j in e_g]
    balls = domain.balls(epsilon)
    d = len(domain)

    def good_embedding(colors) -> Optional[int]:
        for ji, items in enumerate(through):
            if _monochromatic_up_to(colors, items, balls, m):
                return ji
        return None

    if search == "exhaustive":
        total = m ** d
        if total > exhaustive_bound:
            raise ValueError(
                f"exhaustive search over {m}^{d} = {total} colorings exceeds the "
                f"bound {exhaustive_bound}")
        examined = 0
        first_good: Optional[Embedding] = None
        for colors in itertools.product(range(m), repeat=d):
            examined += 1
            ji = good_embedding(colors)
            if ji is None:
                return RamseyVerdict(f, g, x, m, epsilon, mode, False, True, None,
                                     Coloring(d, colors), examined, len(e_g))
            if first_good is None:
                first_good = e_g[ji]
        return RamseyVerdict(f, g, x, m, epsilon, mode, True, True, first_good, None,
                             examined, len(e_g))

    if search == "adversarial":
        rng = random.Random(seed)
        examined = 0
        for _ in range(max(1, iterations // max(1, d))):
            colors = [rng.randrange(m) for _ in range(d)]
            for _ in range(iterations):
                examined += 1
                if good_embedding(colors) is None:
                    return RamseyVerdict(f, g, x, m, epsilon, mode, False, True, None,
                                         Coloring(d, tuple(colors)), examined, len(e_g),
                                         note="adversarial witness")
                # flip the item that appears in the most still-good copies
                counts = [0] * d
                for ji, items in enumerate(through):
                    if _monochromatic_up_to(colors, items, balls, m):
                        for t in items:
                            counts[t] += 1
                t = max(range(d), key=lambda i: (counts[i], -i))
                colors[t] = (colors[t] + 1 + rng.randrange(m - 1)) % m if m > 1 else 0
        return RamseyVerdict(f, g, x, m, epsilon, mode, True, False, None, None,
                             examined, len(e_g), note="no witness found (inconclusive)")

    raise ValueError(f"search must be 'exhaustive' or 'adversarial', got {search!r}")


@dataclass
class FlipColoring:
    space: EmbeddingSpace
    coloring: Coloring
    eps0: Fraction             # minimal positive distance of X
    refutes: Optional[bool]    # None when no epsilon was supplied

    def flip_pairs(self) -> list[tuple[int, int]]:
        pos = self.space._pos
        out = []
        for i, e in enumerate(self.space.embeddings):
            j = pos[(e.images[1], e.images[0])]
            if i < j:
                out.append((i, j))
        return out


def flip_coloring_witness(x: MetricSpace, f: MetricSpace,
                          epsilon: Optional[RationalLike] = None) -> FlipColoring:
    """Two-coloring of the ordered pair-embeddings assigning a pair and its
    transposition opposite colors (by the order of the two image indices).

    No set {i, i . flip} is monochromatic; below the discreteness scale
    eps0 it is not even monochromatic up to epsilon.
    """
    if f.n != 2:
        raise ValueError("F must be a two-point space")
    vals = x.distance_values()
    if not vals:
        raise ValueError("X must have at least two points")
    if f.d(0, 1) not in vals:
        raise ValueError(f"F's distance {f.d(0, 1)} is not realized in X")
    eps0 = vals[0]
    es = EmbeddingSpace(f, x)
    colors = tuple(0 if e.images[0] < e.images[1] else 1 for e in es.embeddings)
    refutes = None
    if epsilon is not None:
        refutes = frac(epsilon) < eps0
    return FlipColoring(es, Coloring(len(es), colors), eps0, refutes)


@dataclass(frozen=True)
class RdmResult:
    ok: bool
    witness_isometry: Optional[PermutationIsometry]
    witness_cover_index: Optional[int]


def rdm_finite_check(x: MetricSpace, group: Sequence[PermutationIsometry],
                     cover: Sequence[Iterable[int]], epsilon: RationalLike,
                     k: Iterable[int]) -> RdmResult:
    """Finite cover form: is some translate gK inside the epsilon
    neighbourhood of one cover element?  The group is closed under
    composition first; scanning order is canonical."""
    epsilon = frac(epsilon)
    cover = [sorted(set(a)) for a in cover]
    k = sorted(set(k))
    union = set().union(*cover) if cover else set()
    if union != set(range(x.n)):
        raise ValueError("cover does not cover the space")
    for a in cover:
        for p in a:
            if not (0 <= p < x.n):
                raise ValueError(f"cover element contains missing point {p}")
    for p in k:
        if not (0 <= p < x.n):
            raise ValueError(f"K contains missing point {p}")

    # closure under composition and inverse, identity included
    seen = {tuple(range(x.n)): PermutationIsometry(x, tuple(range(x.n)), _checked=True)}
    frontier = list(group)
    for g in frontier:
        seen.setdefault(g.images, g)
    changed = True
    while changed:
        changed = False
        current = sorted(seen)
        for a in current:
            for b in current:
                c = tuple(seen[a].images[i] for i in seen[b].images)
                if c not in seen:
                    seen[c] = PermutationIsometry(x, c, _checked=True)
                    changed = True
    elements = [seen[t] for t in sorted(seen)]

    for g in elements:
        gk = [g(p) for p in k]
        for ai, a in enumerate(cover):
            if all(min(x.d(q, p) for p in a) <= epsilon for q in gk):
                return RdmResult(True, g, ai)
    return RdmResult(False, None, None)


def reverify_ramsey_witness(verdict: RamseyVerdict) -> bool:
    """Independent re-check of a refutation witness: confirm that under the
    returned coloring no copy of G is monochromatic up to epsilon.

    Recomputes everything from scratch with plain loops; shares no state
    with the search.
    """
    if verdict.witness_coloring is None:
        return False
    f, g, x = verdict.f, verdict.g, verdict.x
    eps, mode = verdict.epsilon, verdict.mode
    colors = verdict.witness_coloring.colors
    all_f = enumerate_embeddings(f, x)

    key_of: dict[tuple, int] = {}
    objs: list[tuple] = []
    if mode == "embeddings":
        for i, e in enumerate(all_f):
            key_of[e.images] = i
            objs.append(e.images)

        def dist(a: tuple, b: tuple) -> Fraction:
            return max((x.d(p, q) for p, q in zip(a, b)), default=Fraction(0))
    else:
        classes: dict[frozenset, list[tuple]] = {}
        for e in all_f:
            classes.setdefault(frozenset(e.images), []).append(e.images)
        ordered = sorted(classes.items(), key=lambda kv: sorted(kv[0]))
        for i, (_, members) in enumerate(ordered):
            objs.append(sorted(members)[0])
            for im in members:
                key_of[im] = i

        def dist(a: tuple, b: tuple) -> Fraction:
            # quotient of d_sup: min over isometric reindexings of b's image set
            best = None
            for perm in itertools.permutations(sorted(set(b))):
                if all(x.d(perm[i], perm[j]) == f.d(i, j) for i, j in f.pairs()):
                    val = max((x.d(a[t], perm[t]) for t in range(f.n)),
                              default=Fraction(0))
                    if best is None or val < best:
                        best = val
            return best

    if len(colors) != len(objs):
        return False

    for j in enumerate_embeddings(g, x):
        through = sorted({key_of[tuple(j.images[t] for t in k.images)]
                          for k in enumerate_embeddings(f, g)})
        for c in range(verdict.m):
            if all(any(colors[o] == c and dist(objs[t], objs[o]) <= eps
                       for o in range(len(objs))) for t in through):
                return False  # this copy of G is monochromatic up to eps
    return True
