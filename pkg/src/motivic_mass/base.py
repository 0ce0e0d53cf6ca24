"""Base-field profiles: mod-2 motivic cohomology of C, R and F_q, with its
Steenrod action and the 2-adic valuation parameters driving differentials.

Coefficient monomials tau^a rho^r u^e are tuples (a, r, e).  Cohomological
bidegrees: tau in (0,1), rho and u in (1,1).  Normal forms per field:

    C    : r = e = 0
    R    : e = 0 (u and rho are the same class; u-exponents fold into r)
    Fq1  : r = 0 (rho vanishes), e <= 1 (u^2 = 0)
    Fq3  : e = 0 (u = rho), r <= 1 (rho^2 = 0)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

Coef = Tuple[int, int, int]

ONE: Coef = (0, 0, 0)
TAU: Coef = (1, 0, 0)
RHO: Coef = (0, 1, 0)
U: Coef = (0, 0, 1)


def nu2(n: int) -> int:
    """2-adic valuation of a positive integer."""
    if n <= 0:
        raise ValueError(f"nu2 needs a positive integer, got {n}")
    return (n & -n).bit_length() - 1


def epsilon(q: int) -> int:
    return nu2(q - 1)


def lam(q: int) -> int:
    return nu2(q * q - 1)


def _is_prime_power(n: int) -> bool:
    if n < 2:
        return False
    for p in range(2, n + 1):
        if p * p > n:
            return True  # n itself is prime
        if n % p == 0:
            while n % p == 0:
                n //= p
            return n == 1
    return False


@dataclass(frozen=True)
class BaseProfile:
    """One of the supported base fields, with its valuation parameters."""

    kind: str  # "C", "R", "Fq1", "Fq3"
    q: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("C", "R", "Fq1", "Fq3"):
            raise ValueError(f"unknown base field kind {self.kind!r}")
        if self.kind in ("Fq1", "Fq3"):
            q = self.q
            if q is None or not _is_prime_power(q) or q % 2 == 0:
                raise ValueError(f"q must be an odd prime power, got {q}")
            if self.kind == "Fq1" and q % 4 != 1:
                raise ValueError(f"kind Fq1 needs q = 1 mod 4, got q={q}")
            if self.kind == "Fq3" and q % 4 != 3:
                raise ValueError(f"kind Fq3 needs q = 3 mod 4, got q={q}")
        elif self.q is not None:
            raise ValueError("q only applies to finite-field profiles")

    @property
    def eps(self) -> int:
        if self.kind != "Fq1":
            raise ValueError("epsilon is defined for q = 1 mod 4 only")
        return epsilon(self.q)

    @property
    def lam(self) -> int:
        if self.kind != "Fq3":
            raise ValueError("lambda is defined for q = 3 mod 4 only")
        return lam(self.q)

    @property
    def finite(self) -> bool:
        return self.kind in ("Fq1", "Fq3")

    def key(self) -> str:
        """Structural identity: Ext tables depend on the kind alone."""
        return self.kind

    def describe(self) -> str:
        if self.finite:
            return f"{self.kind}(q={self.q})"
        return self.kind


def profile(kind: str, q: Optional[int] = None) -> BaseProfile:
    """Convenience constructor; infers Fq1/Fq3 from q when kind is 'fq'."""
    kind = {"c": "C", "r": "R"}.get(kind.lower(), kind)
    if kind.lower() == "fq":
        if q is None:
            raise ValueError("finite-field profile needs q")
        kind = "Fq1" if q % 4 == 1 else "Fq3"
    return BaseProfile(kind, q)


def normalize_coef(m: Coef, p: BaseProfile) -> Optional[Coef]:
    """Canonical coefficient monomial, or None when it is zero."""
    a, r, e = m
    if a < 0 or r < 0 or e < 0:
        raise ValueError(f"negative exponents in {m}")
    k = p.kind
    if k == "C":
        return (a, 0, 0) if r == 0 and e == 0 else None
    if k == "R":
        return (a, r + e, 0)  # u means rho over R
    if k == "Fq1":
        if r > 0 or e > 1:
            return None
        return (a, 0, e)
    # Fq3: u means rho, rho^2 = 0
    r += e
    return (a, r, 0) if r <= 1 else None


def coef_degree(m: Coef) -> Tuple[int, int]:
    a, r, e = m
    return (r + e, a + r + e)


def coef_mul(m1: Coef, m2: Coef, p: BaseProfile) -> Optional[Coef]:
    return normalize_coef((m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2]), p)


def _sq_gen(i: int, gen: Coef) -> Tuple[Coef, ...]:
    """Sq^i on a single generator tau, rho or u (before normalization)."""
    if i == 0:
        return (gen,)
    if i == 1 and gen == TAU:
        return (RHO,)  # Bockstein: beta(tau) = rho, beta(rho) = beta(u) = 0
    return ()


class CoefOps:
    """Per-profile coefficient arithmetic with a memoized Steenrod action."""

    def __init__(self, p: BaseProfile):
        self.profile = p
        self._sq_memo: Dict[Tuple[int, Coef], Tuple[Coef, ...]] = {}

    def mul(self, m1: Coef, m2: Coef) -> Optional[Coef]:
        return coef_mul(m1, m2, self.profile)

    def sq(self, i: int, m: Coef) -> Tuple[Coef, ...]:
        """Total action of Sq^i on a coefficient monomial (GF(2) sum).

        Extends the Bockstein on generators by the motivic Cartan formula,
        whose odd-by-odd cross terms carry tau (even target) or rho (odd
        target).  Over finite fields only Sq^0 and Sq^1 act nontrivially.
        """
        m0 = normalize_coef(m, self.profile)
        if m0 is None:
            return ()
        return self._sq(i, m0)

    def _sq(self, i: int, m: Coef) -> Tuple[Coef, ...]:
        key = (i, m)
        hit = self._sq_memo.get(key)
        if hit is not None:
            return hit
        if i == 0:
            out: Tuple[Coef, ...] = (m,)
        elif m == ONE:
            out = ()
        else:
            a, r, e = m
            if a > 0:
                gen, rest = TAU, (a - 1, r, e)
            elif r > 0:
                gen, rest = RHO, (a, r - 1, e)
            else:
                gen, rest = U, (a, r, e - 1)
            beta_g = _sq_gen(1, gen)
            acc: Dict[Coef, int] = {}

            def xor_in(g1: Coef, terms, extra: Optional[Coef] = None):
                for g2 in terms:
                    t = self.mul(g1, g2)
                    if t is not None and extra is not None:
                        t = self.mul(extra, t)
                    if t is not None:
                        acc[t] = acc.get(t, 0) ^ 1

            xor_in(gen, self._sq(i, rest))
            if i % 2 == 1:
                for g1 in beta_g:
                    xor_in(g1, self._sq(i - 1, rest))
                if i >= 3:
                    for g1 in beta_g:
                        xor_in(g1, self._sq(i - 2, rest), RHO)
            else:
                for g1 in beta_g:
                    xor_in(g1, self._sq(i - 1, rest), TAU)
            out = tuple(sorted(t for t, c in acc.items() if c))
        self._sq_memo[key] = out
        return out

    def sq_seq(self, seq: Tuple[int, ...], m: Coef) -> Tuple[Coef, ...]:
        """Action of an admissible word Sq^{i1}...Sq^{ik} (rightmost first)."""
        terms = {m: 1}
        for i in reversed(seq):
            nxt: Dict[Coef, int] = {}
            for t, c in terms.items():
                if not c:
                    continue
                for r in self._sq(i, t):
                    nxt[r] = nxt.get(r, 0) ^ 1
            terms = nxt
        return tuple(sorted(t for t, c in terms.items() if c))


@lru_cache(maxsize=None)
def coef_ops(p: BaseProfile) -> CoefOps:
    return CoefOps(p)


def coef_str(m: Coef) -> str:
    a, r, e = m
    parts = []
    if a:
        parts.append("tau" if a == 1 else f"tau^{a}")
    if r:
        parts.append("rho" if r == 1 else f"rho^{r}")
    if e:
        parts.append("u" if e == 1 else f"u^{e}")
    return " ".join(parts) if parts else "1"


def parse_coef(s: str) -> Coef:
    a = r = e = 0
    for tok in s.split():
        if tok == "1":
            continue
        name, _, exp = tok.partition("^")
        n = int(exp) if exp else 1
        if name == "tau":
            a += n
        elif name == "rho":
            r += n
        elif name == "u":
            e += n
        else:
            raise ValueError(f"bad coefficient token {tok!r}")
    return (a, r, e)
