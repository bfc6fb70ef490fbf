"""Exact finite metric spaces: validation, indexed families, gluing,
embedding enumeration, isometry groups, and PSD embeddability tests.

All distances are `fractions.Fraction`; no floating point enters any
verdict path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

RationalLike = Union[Fraction, int, str]


def frac(x: RationalLike) -> Fraction:
    """Exact rational from an int, Fraction, or 'p/q' string.

    Floats are rejected on purpose: every quantity entering a verdict
    must be exact.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError(f"not an exact rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact rational: {x!r}")


@dataclass(frozen=True)
class Violation:
    """One broken metric axiom, with the indices that break it."""

    kind: str  # shape | diagonal | negative | asymmetry | separation | triangle
    where: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}{self.where}: {self.detail}"


class MetricValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:4])
        more = "" if len(self.violations) <= 4 else f" (+{len(self.violations) - 4} more)"
        super().__init__(f"not a metric: {head}{more}")


def _matrix_violations(rows, require_separation: bool) -> list[Violation]:
    out: list[Violation] = []
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            out.append(Violation("shape", (i,), f"row {i} has {len(r)} entries, expected {n}"))
    if out:
        return out
    for i in range(n):
        if rows[i][i] != 0:
            out.append(Violation("diagonal", (i,), f"d({i},{i}) = {rows[i][i]} != 0"))
    for i in range(n):
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                out.append(Violation("asymmetry", (i, j), f"{rows[i][j]} != {rows[j][i]}"))
            if rows[i][j] < 0:
                out.append(Violation("negative", (i, j), f"d({i},{j}) = {rows[i][j]} < 0"))
            elif require_separation and rows[i][j] == 0:
                out.append(Violation("separation", (i, j), f"d({i},{j}) = 0 for distinct points"))
    if out:
        return out
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(n):
                if j == i or j == k:
                    continue
                if rows[i][k] > rows[i][j] + rows[j][k]:
                    out.append(Violation(
                        "triangle", (i, j, k),
                        f"d({i},{k}) = {rows[i][k]} > {rows[i][j]} + {rows[j][k]}"))
    return out


def metric_violations(rows) -> list[Violation]:
    """Complete list of metric-axiom violations of a rational matrix."""
    rows = tuple(tuple(frac(v) for v in r) for r in rows)
    return _matrix_violations(rows, require_separation=True)


def pseudometric_violations(rows) -> list[Violation]:
    """Same as :func:`metric_violations` but zero off-diagonal entries are allowed."""
    rows = tuple(tuple(frac(v) for v in r) for r in rows)
    return _matrix_violations(rows, require_separation=False)


def _default_labels(n: int) -> tuple[str, ...]:
    return tuple(f"p{i}" for i in range(n))


class MetricSpace:
    """Immutable finite metric space with an exact rational distance matrix."""

    __slots__ = ("n", "labels", "rows", "_label_index")

    def __init__(self, rows, labels: Optional[Sequence[str]] = None, *, _checked: bool = False):
        rows = tuple(tuple(frac(v) for v in r) for r in rows)
        if not _checked:
            bad = _matrix_violations(rows, require_separation=True)
            if bad:
                raise MetricValidationError(bad)
        self.rows = rows
        self.n = len(rows)
        if labels is None:
            labels = _default_labels(self.n)
        labels = tuple(str(x) for x in labels)
        if len(labels) != self.n:
            raise ValueError(f"{len(labels)} labels for {self.n} points")
        if len(set(labels)) != self.n:
            raise ValueError("labels must be distinct")
        self.labels = labels
        self._label_index = {lbl: i for i, lbl in enumerate(labels)}

    def d(self, i: int, j: int) -> Fraction:
        return self.rows[i][j]

    def points(self) -> range:
        return range(self.n)

    def pairs(self):
        return itertools.combinations(range(self.n), 2)

    def label_index(self, label: str) -> int:
        return self._label_index[label]

    def diameter(self) -> Fraction:
        if self.n < 2:
            return Fraction(0)
        return max(self.rows[i][j] for i, j in self.pairs())

    def min_positive(self) -> Optional[Fraction]:
        vals = [self.rows[i][j] for i, j in self.pairs()]
        return min(vals) if vals else None

    def distance_values(self) -> list[Fraction]:
        """Sorted distinct positive distances."""
        return sorted({self.rows[i][j] for i, j in self.pairs()})

    def restrict(self, points: Sequence[int]) -> "MetricSpace":
        points = list(points)
        rows = [[self.rows[a][b] for b in points] for a in points]
        labels = [self.labels[a] for a in points]
        return MetricSpace(rows, labels, _checked=True)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MetricSpace)
                and self.rows == other.rows and self.labels == other.labels)

    def __hash__(self) -> int:
        return hash((self.rows, self.labels))

    def __repr__(self) -> str:
        return f"MetricSpace(n={self.n})"


class PseudoMetricSpace:
    """Like :class:`MetricSpace` but distinct points may sit at distance zero.

    Never silently coerced to a metric space: callers must go through
    :meth:`metric_quotient`, which also reports the collapsed classes.
    """

    __slots__ = ("n", "labels", "rows")

    def __init__(self, rows, labels: Optional[Sequence[str]] = None):
        rows = tuple(tuple(frac(v) for v in r) for r in rows)
        bad = _matrix_violations(rows, require_separation=False)
        if bad:
            raise MetricValidationError(bad)
        self.rows = rows
        self.n = len(rows)
        self.labels = tuple(labels) if labels is not None else _default_labels(self.n)
        if len(self.labels) != self.n:
            raise ValueError(f"{len(self.labels)} labels for {self.n} points")

    def d(self, i: int, j: int) -> Fraction:
        return self.rows[i][j]

    def zero_classes(self) -> list[tuple[int, ...]]:
        """Partition of the points into classes at mutual distance zero."""
        seen = [False] * self.n
        classes = []
        for i in range(self.n):
            if seen[i]:
                continue
            cls = [j for j in range(i, self.n) if self.rows[i][j] == 0]
            for j in cls:
                seen[j] = True
            classes.append(tuple(cls))
        return classes

    def metric_quotient(self) -> tuple[MetricSpace, list[tuple[int, ...]]]:
        """Canonical metric quotient plus the collapse classes (by point index)."""
        classes = self.zero_classes()
        reps = [cls[0] for cls in classes]
        rows = [[self.rows[a][b] for b in reps] for a in reps]
        labels = [self.labels[a] for a in reps]
        return MetricSpace(rows, labels, _checked=True), classes


def validate_metric(rows, labels: Optional[Sequence[str]] = None) -> MetricSpace:
    """Build a MetricSpace, raising MetricValidationError with the complete
    violation list when any axiom fails."""
    return MetricSpace(rows, labels)


class IndexedFamily:
    """A metric space indexed by a finite set: a surjection index -> point.

    Distinct indices may share a point; the image set is recorded.
    """

    __slots__ = ("target", "assignment", "indices", "image")

    def __init__(self, target: MetricSpace, assignment: Mapping):
        self.target = target
        self.assignment = dict(assignment)
        if not self.assignment:
            raise ValueError("index set must be non-empty")
        for idx, p in self.assignment.items():
            if not (0 <= p < target.n):
                raise ValueError(f"index {idx!r} maps to missing point {p}")
        self.indices = tuple(sorted(self.assignment))
        self.image = tuple(sorted(set(self.assignment.values())))

    def point(self, idx) -> int:
        return self.assignment[idx]

    def distance(self, i, j) -> Fraction:
        return self.target.d(self.assignment[i], self.assignment[j])

    def image_space(self) -> MetricSpace:
        return self.target.restrict(self.image)

    def __repr__(self) -> str:
        return f"IndexedFamily({len(self.indices)} indices onto {len(self.image)} points)"


@dataclass(frozen=True)
class EpsilonIsometryResult:
    ok: bool
    max_deviation: Fraction
    worst_pair: Optional[tuple]


def epsilon_isometry_check(a: IndexedFamily, b: IndexedFamily,
                           epsilon: RationalLike) -> EpsilonIsometryResult:
    """Exact check that two families over the same index set differ by at
    most epsilon on every pair of corresponding distances."""
    epsilon = frac(epsilon)
    if a.indices != b.indices:
        raise ValueError("families are indexed by different sets")
    worst = Fraction(0)
    worst_pair = None
    for i, j in itertools.combinations(a.indices, 2):
        dev = abs(a.distance(i, j) - b.distance(i, j))
        if dev > worst:
            worst, worst_pair = dev, (i, j)
    return EpsilonIsometryResult(worst <= epsilon, worst, worst_pair)


class GlueError(ValueError):
    pass


@dataclass(frozen=True)
class GlueResult:
    """Path-metric amalgam of two epsilon-isometric indexed families.

    ``into_a`` / ``into_b`` map points of the respective image spaces to
    points of ``space``.  When bridge weights of zero (or incidental
    collapses) identify vertices, ``collapsed`` lists the merged label
    classes and ``space`` is the canonical metric quotient.
    """

    space: MetricSpace
    into_a: dict
    into_b: dict
    collapsed: tuple

    def bridge_distance(self, a: IndexedFamily, b: IndexedFamily, idx) -> Fraction:
        return self.space.d(self.into_a[a.point(idx)], self.into_b[b.point(idx)])


def glue_indexed(a: IndexedFamily, b: IndexedFamily, epsilon: RationalLike) -> GlueResult:
    """Glue two epsilon-isometric families along bridges of weight epsilon.

    The amalgam is the path metric of the weighted graph on the disjoint
    union of the two image spaces, with intra-space edges weighted by the
    original distances and one bridge per index.
    """
    epsilon = frac(epsilon)
    if epsilon < 0:
        raise GlueError("epsilon must be non-negative")
    rep = epsilon_isometry_check(a, b, epsilon)
    if not rep.ok:
        raise GlueError(
            f"families are not {epsilon}-isometric: deviation {rep.max_deviation} "
            f"at index pair {rep.worst_pair}")

    pa, pb = list(a.image), list(b.image)
    offs_b = len(pa)
    nz = len(pa) + len(pb)
    labels = [f"a:{a.target.labels[p]}" for p in pa] + [f"b:{b.target.labels[p]}" for p in pb]
    pos_a = {p: i for i, p in enumerate(pa)}
    pos_b = {p: offs_b + i for i, p in enumerate(pb)}

    inf = None  # represented as None in the weight table
    w = [[None] * nz for _ in range(nz)]
    for i in range(nz):
        w[i][i] = Fraction(0)

    def put(u, v, val):
        if w[u][v] is None or val < w[u][v]:
            w[u][v] = val
            w[v][u] = val

    for p, q in itertools.combinations(pa, 2):
        put(pos_a[p], pos_a[q], a.target.d(p, q))
    for p, q in itertools.combinations(pb, 2):
        put(pos_b[p], pos_b[q], b.target.d(p, q))
    for idx in a.indices:
        put(pos_a[a.point(idx)], pos_b[b.point(idx)], epsilon)

    # Floyd-Warshall, exact.
    for k in range(nz):
        wk = w[k]
        for i in range(nz):
            wik = w[i][k]
            if wik is None:
                continue
            wi = w[i]
            for j in range(nz):
                if wk[j] is None:
                    continue
                cand = wik + wk[j]
                if wi[j] is None or cand < wi[j]:
                    wi[j] = cand
    if any(w[i][j] is None for i in range(nz) for j in range(nz)):
        raise GlueError("glue graph is disconnected")  # cannot happen with bridges

    pseudo = PseudoMetricSpace(w, labels)
    space, classes = pseudo.metric_quotient()
    rep_of = {}
    for ci, cls in enumerate(classes):
        for v in cls:
            rep_of[v] = ci
    collapsed = tuple(tuple(labels[v] for v in cls) for cls in classes if len(cls) > 1)

    into_a = {p: rep_of[pos_a[p]] for p in pa}
    into_b = {p: rep_of[pos_b[p]] for p in pb}

    # Lemma guarantee, asserted exactly: both restrictions are isometric.
    for p, q in itertools.combinations(pa, 2):
        assert space.d(into_a[p], into_a[q]) == a.target.d(p, q)
    for p, q in itertools.combinations(pb, 2):
        assert space.d(into_b[p], into_b[q]) == b.target.d(p, q)
    for idx in a.indices:
        assert space.d(into_a[a.point(idx)], into_b[b.point(idx)]) <= epsilon

    return GlueResult(space, into_a, into_b, collapsed)


class Embedding:
    """Isometric embedding of a finite metric space into another."""

    __slots__ = ("source", "target", "images")

    def __init__(self, source: MetricSpace, target: MetricSpace,
                 images: Sequence[int], *, _checked: bool = False):
        self.source = source
        self.target = target
        self.images = tuple(images)
        if not _checked:
            if len(self.images) != source.n or len(set(self.images)) != source.n:
                raise ValueError("embedding must assign a distinct target point per source point")
            for i, j in source.pairs():
                if target.d(self.images[i], self.images[j]) != source.d(i, j):
                    raise ValueError(
                        f"not distance-preserving at ({i},{j}): "
                        f"{target.d(self.images[i], self.images[j])} != {source.d(i, j)}")

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __eq__(self, other) -> bool:
        return (isinstance(other, Embedding) and self.images == other.images
                and self.source == other.source and self.target == other.target)

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        return f"Embedding{self.images}"


def enumerate_embeddings(f: MetricSpace, x: MetricSpace) -> list[Embedding]:
    """All isometric embeddings of `f` into `x`, in lexicographic order of
    their image tuples.  Backtracking with exact distance pruning."""
    out: list[Embedding] = []
    images: list[int] = []
    used = [False] * x.n

    def extend(k: int):
        if k == f.n:
            out.append(Embedding(f, x, tuple(images), _checked=True))
            return
        for c in range(x.n):
            if used[c]:
                continue
            ok = True
            for i in range(k):
                if x.d(images[i], c) != f.d(i, k):
                    ok = False
                    break
            if ok:
                used[c] = True
                images.append(c)
                extend(k + 1)
                images.pop()
                used[c] = False

    extend(0)
    return out


class PermutationIsometry:
    """Distance-preserving permutation of a finite metric space."""

    __slots__ = ("space", "images")

    def __init__(self, space: MetricSpace, images: Sequence[int], *, _checked: bool = False):
        self.space = space
        self.images = tuple(images)
        if not _checked:
            if sorted(self.images) != list(range(space.n)):
                raise ValueError("not a permutation of the point set")
            for i, j in space.pairs():
                if space.d(self.images[i], self.images[j]) != space.d(i, j):
                    raise ValueError(f"permutation does not preserve d({i},{j})")

    def __call__(self, i: int) -> int:
        return self.images[i]

    def is_identity(self) -> bool:
        return all(self.images[i] == i for i in range(self.space.n))

    def compose(self, other: "PermutationIsometry") -> "PermutationIsometry":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        return PermutationIsometry(
            self.space, tuple(self.images[other.images[i]] for i in range(self.space.n)),
            _checked=True)

    def inverse(self) -> "PermutationIsometry":
        inv = [0] * self.space.n
        for i, v in enumerate(self.images):
            inv[v] = i
        return PermutationIsometry(self.space, tuple(inv), _checked=True)

    def __eq__(self, other) -> bool:
        return isinstance(other, PermutationIsometry) and self.images == other.images \
            and self.space == other.space

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        return f"PermutationIsometry{self.images}"


def isometry_group(x: MetricSpace) -> list[PermutationIsometry]:
    """The full isometry group of a finite metric space, identity first,
    then lexicographic in image tuples."""
    isos = [PermutationIsometry(x, e.images, _checked=True)
            for e in enumerate_embeddings(x, x)]
    # the identity tuple (0,1,...,n-1) is lexicographically minimal
    assert not isos or isos[0].is_identity()
    return isos


@dataclass(frozen=True)
class EmbeddabilityResult:
    embeddable: bool
    mode: str
    gram: tuple
    pivots: tuple  # ((original_index, pivot_value), ...) in elimination order
    witness: Optional[tuple]  # rational vector v with v^T G v < 0

    def witness_value(self) -> Optional[Fraction]:
        if self.witness is None:
            return None
        g = self.gram
        n = len(g)
        return sum(self.witness[i] * g[i][j] * self.witness[j]
                   for i in range(n) for j in range(n))


def _psd_certificate(g: Sequence[Sequence[Fraction]]):
    """Exact LDL^T pivoting PSD test.

    Returns (is_psd, pivots, witness).  The invariant `A = T G T^T` is
    maintained so a negative diagonal (or a zero diagonal with nonzero
    off-diagonal) converts into an explicit vector with negative form value.
    """
    n = len(g)
    a = [[Fraction(v) for v in row] for row in g]
    t = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    orig = list(range(n))
    pivots = []

    def swap(i, j):
        a[i], a[j] = a[j], a[i]
        for row in a:
            row[i], row[j] = row[j], row[i]
        t[i], t[j] = t[j], t[i]
        orig[i], orig[j] = orig[j], orig[i]

    for s in range(n):
        pivot_at = None
        for k in range(s, n):
            if a[k][k] > 0:
                pivot_at = k
                break
        if pivot_at is None:
            for k in range(s, n):
                if a[k][k] < 0:
                    return False, tuple(pivots), tuple(t[k])
            for k in range(s, n):
                for l in range(k + 1, n):
                    if a[k][l] != 0:
                        # diag is zero here; x = sign * e_k + e_l gives -2|a_kl|
                        sgn = Fraction(-1) if a[k][l] > 0 else Fraction(1)
                        vec = tuple(sgn * t[k][c] + t[l][c] for c in range(n))
                        return False, tuple(pivots), vec
            return True, tuple(pivots), None  # remaining block is zero
        if pivot_at != s:
            swap(s, pivot_at)
        p = a[s][s]
        pivots.append((orig[s], p))
        for i in range(s + 1, n):
            if a[i][s] == 0:
                continue
            m = a[i][s] / p
            for j in range(s, n):
                a[i][j] -= m * a[s][j]
            for c in range(n):
                t[i][c] -= m * t[s][c]
        for i in range(s + 1, n):
            a[s][i] = Fraction(0)
            a[i][s] = Fraction(0)
        if a[s][s] < 0:  # cannot happen; guard for safety
            return False, tuple(pivots), tuple(t[s])
    return True, tuple(pivots), None


def embeddability_test(squared_rows, mode: str = "sphere") -> EmbeddabilityResult:
    """Test whether points with the given exact *squared* distances embed
    isometrically into the unit sphere of a Hilbert space (``sphere``) or
    into a Euclidean space (``euclidean``).

    Sphere mode forms the Gram matrix ``1 - s/2``; euclidean mode
    double-centers ``-s/2``.  Both are tested for positive semidefiniteness
    by exact rational pivoting.
    """
    if mode not in ("sphere", "euclidean"):
        raise ValueError(f"unknown mode {mode!r}")
    rows = tuple(tuple(frac(v) for v in r) for r in squared_rows)
    n = len(rows)
    bad = []
    for i, r in enumerate(rows):
        if len(r) != n:
            bad.append(Violation("shape", (i,), "matrix is not square"))
    if not bad:
        for i in range(n):
            if rows[i][i] != 0:
                bad.append(Violation("diagonal", (i,), "nonzero diagonal"))
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    bad.append(Violation("asymmetry", (i, j), "matrix is not symmetric"))
                if rows[i][j] < 0:
                    bad.append(Violation("negative", (i, j), "negative squared distance"))
    if bad:
        raise MetricValidationError(bad)

    if mode == "sphere":
        gram = tuple(tuple(Fraction(1) - rows[i][j] / 2 for j in range(n)) for i in range(n))
    else:
        rm = [sum(r) / n for r in rows]
        tm = sum(rm) / n
        gram = tuple(
            tuple(-(rows[i][j] - rm[i] - rm[j] + tm) / 2 for j in range(n))
            for i in range(n))

    ok, pivots, witness = _psd_certificate(gram)
    return EmbeddabilityResult(ok, mode, gram, pivots, witness)
