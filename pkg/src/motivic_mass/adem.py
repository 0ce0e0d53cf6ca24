"""Exact arithmetic in the mod-2 motivic Steenrod algebra.

Elements are GF(2) sets of (coefficient monomial, admissible sequence)
pairs.  Products are computed by commuting squares past coefficients and
rewriting inadmissible adjacent pairs with the relation table shipped in
``data/adem_relations.txt``.
"""

from __future__ import annotations

import os
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .base import (
    BaseProfile,
    Coef,
    CoefOps,
    ONE,
    RHO,
    TAU,
    coef_degree,
    coef_ops,
    coef_str,
    normalize_coef,
    parse_coef,
)

Seq = Tuple[int, ...]
Term = Tuple[Coef, Seq]
Element = FrozenSet[Term]

ZERO: Element = frozenset()
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
ADEM_TABLE_PATH = os.path.join(DATA_DIR, "adem_relations.txt")
ADEM_TABLE_FULL_PATH = os.path.join(DATA_DIR, "adem_relations_full.txt")


def sq_degree(i: int) -> Tuple[int, int]:
    return (i, i // 2)


def seq_degree(seq: Sequence[int]) -> Tuple[int, int]:
    t = w = 0
    for i in seq:
        t += i
        w += i // 2
    return (t, w)


def is_admissible(seq: Sequence[int]) -> bool:
    return all(seq[j] >= 2 * seq[j + 1] for j in range(len(seq) - 1))


@lru_cache(maxsize=None)
def admissibles_of_degree(d: int) -> Tuple[Tuple[Seq, int], ...]:
    """Admissible sequences of total degree exactly d, with their weights."""
    if d <= 0:
        return ((tuple(), 0),) if d == 0 else ()
    out: List[Tuple[Seq, int]] = []
    for first in range(1, d + 1):
        for tail, tw in admissibles_of_degree(d - first):
            if tail and first < 2 * tail[0]:
                continue
            out.append(((first,) + tail, first // 2 + tw))
    out.sort()
    return tuple(out)


def admissible_seqs(max_t: int) -> Tuple[Seq, ...]:
    """All nonempty admissible sequences of total degree <= max_t, sorted."""
    out: List[Seq] = []
    for d in range(1, max_t + 1):
        out.extend(seq for seq, _w in admissibles_of_degree(d))
    out.sort()
    return tuple(out)


def term_str(coef: Coef, seq: Seq) -> str:
    s = "Sq(" + ",".join(str(i) for i in seq) + ")" if seq else "Sq()"
    c = coef_str(coef)
    return s if c == "1" else f"{c} {s}"


def element_str(el: Iterable[Term]) -> str:
    terms = sorted(el)
    if not terms:
        return "0"
    return " + ".join(term_str(c, s) for c, s in terms)


def parse_element(text: str) -> Element:
    """Inverse of element_str (used by the relation file and fixtures)."""
    text = text.strip()
    if text == "0":
        return ZERO
    terms: Set[Term] = set()
    for part in text.split(" + "):
        part = part.strip()
        i = part.index("Sq(")
        coef = parse_coef(part[:i]) if part[:i].strip() else ONE
        inner = part[i + 3 : part.index(")", i)]
        seq = tuple(int(x) for x in inner.split(",")) if inner else ()
        terms ^= {(coef, seq)}
    return frozenset(terms)


def load_adem_table(path: str = ADEM_TABLE_PATH) -> Dict[Tuple[int, int], Element]:
    table: Dict[Tuple[int, int], Element] = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, _, rhs = line.partition("->")
            a, b = (int(x) for x in head.split())
            table[(a, b)] = parse_element(rhs)
    return table


class SteenrodAlgebra:
    """Canonical-form arithmetic over one base profile."""

    def __init__(self, p: BaseProfile, table: Optional[Dict[Tuple[int, int], Element]] = None):
        self.profile = p
        self.coefs: CoefOps = coef_ops(p)
        # the R profile keeps rho^2 and higher, so it needs the full table
        raw = table if table is not None else _shared_table(p.kind == "R")
        self.table: Dict[Tuple[int, int], Tuple[Term, ...]] = {}
        for (a, b), el in raw.items():
            terms = []
            for coef, seq in el:
                c = normalize_coef(coef, p)
                if c is not None:
                    terms.append((c, seq))
            self.table[(a, b)] = tuple(sorted(terms))
        self.max_pair = max((a + b for (a, b) in self.table), default=0)
        self._reduce_memo: Dict[Tuple[int, Seq], Tuple[Term, ...]] = {}
        self._commute_memo: Dict[Tuple[int, Coef], Tuple[Tuple[Coef, int], ...]] = {}

    # -- canonical form -------------------------------------------------

    def reduce_seq(self, k: int, seq: Seq) -> Tuple[Term, ...]:
        """Canonical form of Sq^k . Sq^seq for admissible seq."""
        if k == 0:
            return ((ONE, seq),)
        if not seq:
            return ((ONE, (k,)),)
        key = (k, seq)
        hit = self._reduce_memo.get(key)
        if hit is not None:
            return hit
        b = seq[0]
        if k >= 2 * b:
            out: Tuple[Term, ...] = ((ONE, (k,) + seq),)
        else:
            if (k, b) not in self.table:
                raise KeyError(
                    f"Adem table has no entry for Sq^{k} Sq^{b}; regenerate with a larger range"
                )
            rest = seq[1:]
            acc: Set[Term] = set()
            for coef, word in self.table[(k, b)]:
                vec: Element = frozenset({(ONE, rest)})
                for idx in reversed(word):
                    vec = self.left_mul_sq(idx, vec)
                acc ^= self.scale(coef, vec)
            out = tuple(sorted(acc))
        self._reduce_memo[key] = out
        return out

    def commute(self, k: int, coef: Coef) -> Tuple[Tuple[Coef, int], ...]:
        """Rewrite Sq^k . coef as a sum of coef' . Sq^{k'} (k' possibly 0).

        Twisted Cartan in operator form: for even k the cross terms with
        both indices odd (summing to k) carry tau; for odd k they sum to
        k - 1 and carry rho.
        """
        if coef == ONE:
            return ((ONE, k),)
        key = (k, coef)
        hit = self._commute_memo.get(key)
        if hit is not None:
            return hit
        acc: Dict[Tuple[Coef, int], int] = {}

        def put(c: Optional[Coef], kk: int):
            if c is not None:
                acc[(c, kk)] = acc.get((c, kk), 0) ^ 1

        if k % 2 == 0:
            for j in range(0, k + 1, 2):
                for c in self.coefs.sq(j, coef):
                    put(c, k - j)
            for j in range(1, k, 2):
                for c in self.coefs.sq(j, coef):
                    put(self.coefs.mul(TAU, c), k - j)
        else:
            for j in range(0, k + 1):
                for c in self.coefs.sq(j, coef):
                    put(c, k - j)
            for j in range(1, k - 1, 2):
                for c in self.coefs.sq(j, coef):
                    put(self.coefs.mul(RHO, c), k - 1 - j)
        out = tuple(sorted((c, kk) for (c, kk), v in acc.items() if v))
        self._commute_memo[key] = out
        return out

    # -- element algebra -------------------------------------------------

    def normalize_term(self, coef: Coef, raw_seq: Sequence[int]) -> Element:
        """Canonical form of coef . Sq^{raw_seq} for an arbitrary word."""
        c = normalize_coef(coef, self.profile)
        if c is None:
            return ZERO
        acc: Set[Term] = {(ONE, ())}
        for k in reversed([i for i in raw_seq if i != 0]):
            nxt: Set[Term] = set()
            for c1, seq in acc:
                for c2, k2 in self.commute(k, c1):
                    if k2 == 0:
                        nxt ^= {(c2, seq)}
                        continue
                    for c3, seq3 in self.reduce_seq(k2, seq):
                        c4 = self.coefs.mul(c2, c3)
                        if c4 is not None:
                            nxt ^= {(c4, seq3)}
            acc = nxt
        out: Set[Term] = set()
        for c1, seq in acc:
            c2 = self.coefs.mul(c, c1)
            if c2 is not None:
                out ^= {(c2, seq)}
        return frozenset(out)

    def left_mul_sq(self, k: int, el: Iterable[Term]) -> Element:
        if k == 0:
            return frozenset(el)
        acc: Set[Term] = set()
        for coef, seq in el:
            for c2, k2 in self.commute(k, coef):
                if k2 == 0:
                    acc ^= {(c2, seq)}
                    continue
                for c3, seq3 in self.reduce_seq(k2, seq):
                    c4 = self.coefs.mul(c2, c3)
                    if c4 is not None:
                        acc ^= {(c4, seq3)}
        return frozenset(acc)

    def scale(self, coef: Coef, el: Iterable[Term]) -> Element:
        acc: Set[Term] = set()
        for c, seq in el:
            c2 = self.coefs.mul(coef, c)
            if c2 is not None:
                acc ^= {(c2, seq)}
        return frozenset(acc)

    def multiply(self, a: Iterable[Term], b: Iterable[Term]) -> Element:
        acc: Set[Term] = set()
        for coef, seq in a:
            part: Element = frozenset(b)
            for k in reversed(seq):
                part = self.left_mul_sq(k, part)
            acc ^= self.scale(coef, part)
        return frozenset(acc)

    def element(self, *terms: Tuple[Coef, Sequence[int]]) -> Element:
        acc: Set[Term] = set()
        for coef, seq in terms:
            acc ^= self.normalize_term(coef, tuple(seq))
        return frozenset(acc)

    def term_bidegree(self, term: Term) -> Tuple[int, int]:
        (ct, cw), (st, sw) = coef_degree(term[0]), seq_degree(term[1])
        return (ct + st, cw + sw)

    def bidegree(self, el: Element) -> Optional[Tuple[int, int]]:
        degs = {self.term_bidegree(t) for t in el}
        if not degs:
            return None
        if len(degs) > 1:
            raise ValueError(f"inhomogeneous element: {element_str(el)}")
        return degs.pop()

    # -- bases ------------------------------------------------------------

    def coef_monomials_in_degree(self, t: int, w: int) -> List[Coef]:
        """Coefficient monomials of cohomological bidegree (t, w)."""
        out: List[Coef] = []
        kind = self.profile.kind
        if t < 0:
            return out
        if kind == "C":
            if t == 0 and w >= 0:
                out.append((w, 0, 0))
        elif kind == "Fq1":
            for e in (0, 1):
                if t == e and w - e >= 0:
                    out.append((w - e, 0, e))
        elif kind == "Fq3":
            for r in (0, 1):
                if t == r and w - r >= 0:
                    out.append((w - r, r, 0))
        else:  # R
            r = t
            if w - r >= 0:
                out.append((w - r, r, 0))
        return sorted(out)

    def basis_in_bidegree(self, t: int, w: int) -> List[Term]:
        """Deterministically ordered basis of the algebra in bidegree (t, w)."""
        out: List[Term] = []
        if t >= 0:
            for coef in self.coef_monomials_in_degree(t, w):
                out.append((coef, ()))
        for st in range(1, t + 1):
            for seq, sw in admissibles_of_degree(st):
                for coef in self.coef_monomials_in_degree(t - st, w - sw):
                    out.append((coef, seq))
        return sorted(out, key=lambda term: (term[1], term[0]))


@lru_cache(maxsize=None)
def _shared_table(full: bool = False) -> Dict[Tuple[int, int], Element]:
    return load_adem_table(ADEM_TABLE_FULL_PATH if full else ADEM_TABLE_PATH)


@lru_cache(maxsize=None)
def algebra(p: BaseProfile) -> SteenrodAlgebra:
    return SteenrodAlgebra(p)
