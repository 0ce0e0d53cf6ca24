"""GF(2) linear algebra on int bitsets (bit i = coordinate i)."""

from __future__ import annotations

from typing import Iterable, List, Optional, Tuple


def low_bit(v: int) -> int:
    """Index of the lowest set bit of a nonzero int."""
    return (v & -v).bit_length() - 1


def rank(rows: Iterable[int]) -> int:
    basis: List[int] = []
    piv: List[int] = []
    r = 0
    for v in rows:
        for p, b in zip(piv, basis):
            if (v >> p) & 1:
                v ^= b
        if v:
            p = low_bit(v)
            piv.append(p)
            basis.append(v)
            r += 1
    return r


class Subspace:
    """Mutable span with reduced-echelon basis, pivots at lowest set bits."""

    __slots__ = ("pivots", "rows")

    def __init__(self, vectors: Iterable[int] = ()):  # noqa: D107
        self.pivots: List[int] = []
        self.rows: List[int] = []
        for v in vectors:
            self.add(v)

    def reduce(self, v: int) -> int:
        """Canonical residue of v modulo the span."""
        for p, b in zip(self.pivots, self.rows):
            if (v >> p) & 1:
                v ^= b
        return v

    def add(self, v: int) -> bool:
        """Insert v; returns True if the span grew."""
        v = self.reduce(v)
        if not v:
            return False
        p = low_bit(v)
        # keep the stored basis reduced
        for i, b in enumerate(self.rows):
            if (b >> p) & 1:
                self.rows[i] = b ^ v
        k = 0
        while k < len(self.pivots) and self.pivots[k] < p:
            k += 1
        self.pivots.insert(k, p)
        self.rows.insert(k, v)
        return True

    def __contains__(self, v: int) -> bool:
        return self.reduce(v) == 0

    @property
    def dim(self) -> int:
        return len(self.rows)

    def basis(self) -> List[int]:
        return list(self.rows)


def kernel_basis(rows: List[int], width: int) -> List[int]:
    """Basis of left-kernel combos: all c with xor_{i in c} rows[i] = 0.

    Tag bits sit above the value width, so XOR preserves the invariant
    "low part = xor of the rows named by the high part"; residues whose
    value part vanishes yield a kernel basis.
    """
    span = Subspace()
    out = []
    vmask = (1 << width) - 1
    for i, v in enumerate(rows):
        r = span.reduce(v | (1 << (width + i)))
        if r & vmask == 0:
            out.append(r >> width)
        else:
            span.add(r)
    return out


def solve(rows: List[int], width: int, target: int) -> Optional[int]:
    """Combo bitmask c with xor_{i in c} rows[i] = target, or None."""
    span = Subspace()
    for i, v in enumerate(rows):
        span.add(v | (1 << (width + i)))
    r = span.reduce(target)
    if r & ((1 << width) - 1):
        return None
    return r >> width


def image_and_kernel(rows: List[int], width: int) -> Tuple[Subspace, List[int]]:
    """Span of the rows plus kernel combos over row indices."""
    span = Subspace()
    kers = []
    img = Subspace()
    vmask = (1 << width) - 1
    for i, v in enumerate(rows):
        r = span.reduce(v | (1 << (width + i)))
        if r & vmask == 0:
            kers.append(r >> width)
        else:
            span.add(r)
            img.add(v)
    return img, kers
