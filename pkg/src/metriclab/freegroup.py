"""Freely reduced words over a finite generator set.

A letter is a nonzero int: +i is generator i (1-based), -i its inverse.
Words are tuples of letters with no adjacent inverse pair.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

Word = tuple[int, ...]

IDENTITY: Word = ()


def letter_key(letter: int) -> tuple[int, int]:
    """Canonical letter order: g1 < g1^-1 < g2 < g2^-1 < ..."""
    return (abs(letter), 0 if letter > 0 else 1)


def letters(rank: int) -> list[int]:
    out = []
    for i in range(1, rank + 1):
        out.extend((i, -i))
    return out


def free_reduce(seq: Iterable[int]) -> Word:
    """Cancel adjacent inverse pairs until none remain."""
    stack: list[int] = []
    for a in seq:
        if a == 0:
            raise ValueError("0 is not a letter")
        if stack and stack[-1] == -a:
            stack.pop()
        else:
            stack.append(a)
    return tuple(stack)


def word_mul(u: Word, v: Word) -> Word:
    """Product of two reduced words; only boundary cancellation can occur."""
    stack = list(u)
    for a in v:
        if stack and stack[-1] == -a:
            stack.pop()
        else:
            stack.append(a)
    return tuple(stack)


def word_inv(u: Word) -> Word:
    return tuple(-a for a in reversed(u))


def word_conj(u: Word, by: Word) -> Word:
    return word_mul(word_mul(by, u), word_inv(by))


def ball_size(rank: int, radius: int) -> int:
    """Number of reduced words of length at most `radius`."""
    if rank == 0:
        return 1
    total, layer = 1, 1
    for length in range(1, radius + 1):
        layer = layer * (2 * rank - 1) if length > 1 else 2 * rank
        total += layer
    return total


def ball(rank: int, radius: int) -> list[Word]:
    """All reduced words of length <= radius, identity first, then ordered
    by length and lexicographically in canonical letter order."""
    if rank < 0 or radius < 0:
        raise ValueError("rank and radius must be non-negative")
    out: list[Word] = [IDENTITY]
    alphabet = sorted(letters(rank), key=letter_key)
    layer: list[Word] = [IDENTITY]
    for _ in range(radius):
        nxt: list[Word] = []
        for w in layer:
            last = w[-1] if w else 0
            for a in alphabet:
                if a != -last:
                    nxt.append(w + (a,))
        out.extend(nxt)
        layer = nxt
    return out


def iter_ball(rank: int, radius: int) -> Iterator[Word]:
    """Depth-first enumeration of the ball (prefix order, canonical letters).

    Memory stays O(radius); the order differs from :func:`ball`.
    """
    alphabet = sorted(letters(rank), key=letter_key)

    def rec(w: list[int]):
        yield tuple(w)
        if len(w) == radius:
            return
        last = w[-1] if w else 0
        for a in alphabet:
            if a != -last:
                w.append(a)
                yield from rec(w)
                w.pop()

    yield from rec([])


def word_str(w: Word) -> str:
    if not w:
        return "e"
    parts = []
    for a in w:
        parts.append(f"g{a}" if a > 0 else f"g{-a}^-1")
    return "*".join(parts)
