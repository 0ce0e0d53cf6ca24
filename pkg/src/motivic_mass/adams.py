"""Rule-driven trigraded spectral sequence engine.

Pages are subquotients of the second page tracked as (cycles, boundaries)
subspace pairs per tridegree; differentials are declarative rules applied
through the Leibniz rule over the monomial basis.  The engine never
infers a differential: coefficient-power rules follow the valuation
formula, everything else ships as cited rule data.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .base import BaseProfile, nu2
from .ext import CellKey, ExtError, ExtRing, Monomial, MonomialBasis
from .gf2 import Subspace, rank, solve

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

FormalSum = Tuple[Monomial, ...]


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    acc: Dict[str, int] = {}
    for name, e in a + b:
        acc[name] = acc.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in acc.items() if e))


def mono_str(m: Monomial) -> str:
    if not m:
        return "1"
    return "*".join(n if e == 1 else f"{n}^{e}" for n, e in m)


def parse_monomial(text: str) -> Monomial:
    text = text.strip()
    if text in ("1", ""):
        return ()
    out = []
    for tok in text.split("*"):
        tok = tok.strip()
        m = re.fullmatch(r"(.+?)(?:\^(\d+))?", tok)
        out.append((m.group(1), int(m.group(2) or 1)))
    return tuple(sorted(out))


def parse_formal(text: str) -> FormalSum:
    text = text.strip()
    if text == "zero":
        return ()
    return tuple(parse_monomial(part) for part in text.split(" + "))


@dataclass
class Rule:
    page: int
    source: Monomial
    target: FormalSum
    cite: str
    exact: bool = False
    override: bool = False
    mod8: Optional[int] = None
    scenario: Optional[str] = None


@dataclass
class HiddenExtension:
    source: Monomial
    target: Monomial
    cite: str


def _binom_odd(n: int, k: int) -> bool:
    return (n & k) == k and n >= k


def rules_path(kind: str) -> str:
    return os.path.join(DATA_DIR, f"adams_rules_{'q1' if kind == 'Fq1' else 'q3'}.txt")


def load_rules(path: str) -> Tuple[List[Rule], List[HiddenExtension]]:
    rules: List[Rule] = []
    hidden: List[HiddenExtension] = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = dict(re.findall(r"(\w+)=(\"[^\"]*\"|\S+)", line))
            fields = {k: v.strip('"') for k, v in fields.items()}
            if line.startswith("rule "):
                rules.append(Rule(
                    page=int(fields["page"]),
                    source=parse_monomial(fields["src"]),
                    target=parse_formal(fields["dst"]),
                    cite=fields.get("cite", "?"),
                    exact=fields.get("exact") == "1",
                    override=fields.get("override") == "1",
                    mod8=int(fields["mod8"]) if "mod8" in fields else None,
                    scenario=fields.get("scenario"),
                ))
            elif line.startswith("extension "):
                hidden.append(HiddenExtension(
                    source=parse_monomial(fields["src"]),
                    target=parse_monomial(fields["dst"]),
                    cite=fields.get("cite", "?"),
                ))
            else:
                raise ValueError(f"bad rule line: {line}")
    return rules, hidden


def select_rules(rules: Sequence[Rule], q: int, scenario: Optional[str]) -> List[Rule]:
    out = []
    for r in rules:
        if r.mod8 is not None and q % 8 != r.mod8:
            continue
        if r.scenario is not None and r.scenario != scenario:
            continue
        out.append(r)
    return out


class PageSpace:
    """What the engine needs of a tri-graded algebra slice."""

    coefficient_names: Set[str] = set()

    def cell_keys(self) -> List[CellKey]:
        raise NotImplementedError

    def basis(self, key: CellKey) -> List[Monomial]:
        raise NotImplementedError

    def project(self, key: CellKey, formal: Iterable[Monomial]) -> int:
        """Coordinates (bitmask over basis) of a formal sum; 0 if empty."""
        raise NotImplementedError

    def monomial_key(self, m: Monomial) -> CellKey:
        raise NotImplementedError


class ExtPageSpace(PageSpace):
    """The weight slice of the second page of the Adams spectral sequence."""

    def __init__(self, ring: ExtRing, monos: MonomialBasis, weight: int,
                 s_max: int, f_max: int):
        self.ring = ring
        self.monos = monos
        self.weight = weight
        self.s_max = s_max
        self.f_max = f_max
        self.coefficient_names = set(ring.coef_classes)

    def cell_keys(self) -> List[CellKey]:
        out = []
        for f in range(0, self.f_max + 1):
            for s in range(0, self.s_max + 1):
                key = (f, s, self.weight)
                if self.ring.table.in_window(*key) and self.ring.table.dim(*key):
                    out.append(key)
        return out

    def basis(self, key: CellKey) -> List[Monomial]:
        return [m for m, _v in self.monos.monomials(key)]

    def project(self, key: CellKey, formal: Iterable[Monomial]) -> int:
        acc = 0
        for mono in formal:
            k2, v2 = self.monos.eval(mono)
            if v2 == 0:
                continue
            if k2 != key:
                raise ExtError(f"formal term {mono_str(mono)} lands at {k2} not {key}")
            acc ^= v2
        if acc == 0:
            return 0
        basis = self.monos.monomials(key)
        rows = [v for _m, v in basis]
        combo = solve(rows, max(r.bit_length() for r in rows + [acc]), acc)
        if combo is None:
            raise ExtError(f"value outside page cell {key}")
        return combo

    def monomial_key(self, m: Monomial) -> CellKey:
        f = s = w = 0
        for name, e in m:
            info = self.ring.class_of(name)
            f += info.key[0] * e
            s += info.key[1] * e
            w += info.key[2] * e
        return (f, s, w)


class HZPageSpace(PageSpace):
    """First page of the integral-coefficient miniature: F2[tau, v, h0]/(v^2)
    with v the weight (1,1) class (u or rho according to the residue)."""

    def __init__(self, kind: str, w_max: int, f_max: int):
        self.vname = "u" if kind == "Fq1" else "rho"
        self.w_max = w_max
        self.f_max = f_max
        self.coefficient_names = {"tau", self.vname}

    def _mono(self, a: int, e: int, k: int) -> Monomial:
        out = []
        if self.vname < "tau":
            if e:
                out.append((self.vname, e))
        out.append(("tau", a)) if a else None
        return tuple(sorted(([("tau", a)] if a else []) + ([(self.vname, e)] if e else [])
                            + ([("h0", k)] if k else [])))

    def cell_keys(self) -> List[CellKey]:
        out = []
        for a in range(0, self.w_max + 1):
            for e in (0, 1):
                for k in range(0, self.f_max + 1):
                    out.append((k, -e, -a - e))
        return sorted(set(out))

    def basis(self, key: CellKey) -> List[Monomial]:
        f, s, w = key
        e = -s
        a = -w - e
        if e in (0, 1) and a >= 0 and 0 <= f <= self.f_max and a <= self.w_max:
            return [self._mono(a, e, f)]
        return []

    def project(self, key: CellKey, formal: Iterable[Monomial]) -> int:
        acc = 0
        base = self.basis(key)
        for mono in formal:
            counts = dict(mono)
            if counts.get(self.vname, 0) >= 2:
                continue  # v^2 = 0
            norm = self._mono(counts.get("tau", 0), counts.get(self.vname, 0),
                              counts.get("h0", 0))
            if self.monomial_key(norm) != key:
                raise ValueError(f"term {mono_str(mono)} lands outside {key}")
            if base and norm == base[0]:
                acc ^= 1
        return acc

    def monomial_key(self, m: Monomial) -> CellKey:
        counts = dict(m)
        a = counts.get("tau", 0)
        e = counts.get(self.vname, 0)
        k = counts.get("h0", 0)
        return (k, -e, -a - e)


@dataclass
class LedgerEntry:
    page: int
    key: CellKey
    source: str
    target: str
    cites: Tuple[str, ...]


class SpectralSequence:
    def __init__(self, space: PageSpace, profile: BaseProfile,
                 rules: Sequence[Rule], first_page: int = 2):
        self.space = space
        self.profile = profile
        self.rules = list(rules)
        self.first_page = first_page
        self.q = profile.q
        self.cells: Dict[CellKey, Tuple[List[Monomial], Subspace, Subspace]] = {}
        for key in space.cell_keys():
            basis = space.basis(key)
            if not basis:
                continue
            z = Subspace(1 << i for i in range(len(basis)))
            self.cells[key] = (basis, z, Subspace())
        self.ledger: List[LedgerEntry] = []
        self.diagnostics: List[str] = []
        self.page_reached = first_page

    # -- rule evaluation -----------------------------------------------------

    def _coef_rule(self, mono: Monomial, page: int) -> Optional[Tuple[Monomial, str]]:
        """The coefficient-power differential on the tau part, if it fires."""
        counts = dict(mono)
        kind = self.profile.kind
        if kind == "Fq1":
            if counts.get("u", 0):
                return None
            a = counts.get("tau", 0)
            if a == 0:
                return None
            p = nu2(self.q ** a - 1)
            if p != page:
                return None
            rest = tuple((n, e) for n, e in mono if n != "tau")
            tgt = mono_mul(rest, (("h0", p), ("tau", a - 1), ("u", 1)))
            return (tgt, f"tau-power j={a}")
        if kind == "Fq3":
            if counts.get("rho", 0) or counts.get("[rho tau]", 0) or counts.get("u", 0):
                return None
            i = counts.get("[tau^2]", 0)
            a2 = counts.get("tau", 0)
            if i == 0 and a2 == 0:
                return None
            if a2:  # plain tau powers only occur in the integral miniature
                p = nu2(self.q ** a2 - 1)
                if p != page:
                    return None
                rest = tuple((n, e) for n, e in mono if n != "tau")
                tgt = mono_mul(rest, (("h0", p), ("rho", 1)) + ((("tau", a2 - 1),) if a2 > 1 else ()))
                return (tgt, f"tau-power j={a2}")
            p = nu2(self.q ** (2 * i) - 1)
            if p != page:
                return None
            rest = tuple((n, e) for n, e in mono if n != "[tau^2]")
            tail: List[Tuple[str, int]] = [("h0", p), ("[rho tau]", 1)]
            if i > 1:
                tail.append(("[tau^2]", i - 1))
            return (mono_mul(rest, tuple(tail)), f"tau-square-power n={i}")
        return None

    def _rule_applications(self, mono: Monomial, page: int) -> Tuple[List[Tuple[Monomial, str]], bool]:
        """Formal contributions to d_page(mono); flag signals an override."""
        over = []
        for r in self.rules:
            if r.page == page and r.override and r.source == mono:
                over.append(r)
        if over:
            out = []
            for r in over:
                for t in r.target:
                    out.append((t, r.cite))
            return out, True
        out: List[Tuple[Monomial, str]] = []
        coef = self._coef_rule(mono, page)
        if coef is not None:
            out.append(coef)
        counts = dict(mono)
        for r in self.rules:
            if r.page != page or r.override:
                continue
            if r.exact:
                if r.source != mono:
                    continue
                quotient: Monomial = ()
            else:
                ok = True
                parity = True
                for name, e in r.source:
                    have = counts.get(name, 0)
                    if have < e:
                        ok = False
                        break
                    if not _binom_odd(have, e):
                        parity = False
                if not ok or not parity:
                    continue
                src = dict(r.source)
                quotient = tuple(sorted((n, e - src.get(n, 0))
                                        for n, e in mono if e - src.get(n, 0) > 0))
            for t in r.target:
                out.append((mono_mul(quotient, t), r.cite))
        return out, False

    # -- the page loop ------------------------------------------------------------

    def page_basis(self, key: CellKey) -> List[int]:
        basis, z, b = self.cells[key]
        q = Subspace()
        out = []
        for row in z.basis():
            r = b.reduce(row)
            r = q.reduce(r)
            if r:
                q.add(r)
                out.append(r)
        return out

    def _vec_monomials(self, key: CellKey, vec: int) -> List[Monomial]:
        basis = self.cells[key][0]
        return [basis[i] for i in range(len(basis)) if (vec >> i) & 1]

    def run(self, max_page: int):
        for page in range(self.first_page, max_page + 1):
            updates: List[Tuple[CellKey, List[int], CellKey, List[int]]] = []
            for key in sorted(self.cells):
                f, s, w = key
                tgt_key = (f + page, s - 1, w)
                pbasis = self.page_basis(key)
                if not pbasis:
                    continue
                images = []
                any_nonzero = False
                for vec in pbasis:
                    formal: List[Tuple[Monomial, str]] = []
                    for mono in self._vec_monomials(key, vec):
                        contrib, _ov = self._rule_applications(mono, page)
                        formal.extend(contrib)
                    if not formal:
                        images.append(0)
                        continue
                    if tgt_key not in self.cells:
                        img = self.space.project(tgt_key, [m for m, _c in formal]) \
                            if self._target_exists(tgt_key) else 0
                        if img:
                            raise ExtError(
                                f"differential at {key} hits missing cell {tgt_key}"
                            )
                        images.append(0)
                        continue
                    img = self.space.project(tgt_key, [m for m, _c in formal])
                    tz, tb = self.cells[tgt_key][1], self.cells[tgt_key][2]
                    if img and tz.reduce(img) != 0 and tb.reduce(tz.reduce(img)) != 0:
                        pass
                    red = tb.reduce(img)
                    images.append(red)
                    if red:
                        any_nonzero = True
                        self.ledger.append(LedgerEntry(
                            page, key,
                            " + ".join(mono_str(m) for m in self._vec_monomials(key, vec)),
                            " + ".join(sorted({mono_str(m) for m, _c in formal})),
                            tuple(sorted({c for _m, c in formal})),
                        ))
                if any_nonzero or True:
                    updates.append((key, pbasis, tgt_key, images))
            # apply all updates for this page at once
            new_cycles: Dict[CellKey, List[int]] = {}
            new_bounds: Dict[CellKey, List[int]] = {}
            for key, pbasis, tgt_key, images in updates:
                kers = []
                n = len(pbasis)
                aug = Subspace()
                for i, img in enumerate(images):
                    r = aug.reduce((img << n) | (1 << i)) if False else None
                from .gf2 import kernel_basis
                width = max((v.bit_length() for v in images), default=0) or 1
                for combo in kernel_basis(images, width):
                    vec = 0
                    for i in range(n):
                        if (combo >> i) & 1:
                            vec ^= pbasis[i]
                    kers.append(vec)
                new_cycles.setdefault(key, []).extend(kers)
                for img in images:
                    if img:
                        new_bounds.setdefault(tgt_key, []).append(img)
            for key in self.cells:
                basis, z, b = self.cells[key]
                z2 = Subspace(b.basis())
                for v in new_cycles.get(key, ()):
                    z2.add(v)
                for v in new_bounds.get(key, ()):
                    z2.add(v)
                    b.add(v)
                self.cells[key] = (basis, z2, b)
            self.page_reached = page + 1

    def _target_exists(self, key: CellKey) -> bool:
        return key in self.cells

    # -- outputs -----------------------------------------------------------------

    def surviving(self, key: CellKey) -> List[int]:
        if key not in self.cells:
            return []
        return self.page_basis(key)

    def dims(self) -> Dict[CellKey, int]:
        return {key: len(self.page_basis(key)) for key in self.cells}
