"""Derive the motivic Adem relation table from the squaring action on
products of the mod-2 classifying space of mu_2.

Over an odd base the classifying space has cohomology H[[u, v]] with
u^2 = tau v + rho u, Sq^1 u = v, Sq^2 v = v^2, and the squares act on
products through the twisted Cartan formula.  Evaluating an inadmissible
composite Sq^a Sq^b on enough probe classes pins down its expansion in
the admissible basis; every solve is required to have a unique solution.

Two tables are shipped: the working table, exact modulo rho^2 (enough
for the C, F_q profiles, whose coefficients kill rho or rho^2), and a
low-degree table with full rho powers for the R profile.

Run ``python -m motivic_mass.adem_generate`` to regenerate both.
"""

from __future__ import annotations

import sys
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .adem import (
    ADEM_TABLE_PATH,
    ADEM_TABLE_FULL_PATH,
    Seq,
    admissible_seqs,
    element_str,
    seq_degree,
)
from .base import BaseProfile, Coef, CoefOps, ONE, RHO, TAU, coef_ops, normalize_coef

N_FACTORS = 3
DEFAULT_MAX_DEGREE = 38
DEFAULT_MAX_DEGREE_FULL = 22

# monomial in the probe ring: (coef, u-exponents, v-exponents)
Mono = Tuple[Coef, Tuple[int, ...], Tuple[int, ...]]
Vec = FrozenSet[Mono]

_UNIT_U = (0,) * N_FACTORS


class ClassifyingSpace:
    """H[[u_i, v_i]] / (u_i^2 = tau v_i + rho u_i) with its Sq action."""

    def __init__(self, coefs: CoefOps):
        self.coefs = coefs
        self._sq_memo: Dict[Tuple[int, Mono], Vec] = {}
        self._word_memo: Dict[Tuple[Seq, Mono], Vec] = {}

    def mono(self, coef: Optional[Coef], us: Sequence[int], vs: Sequence[int]) -> Vec:
        """Normalize u-exponents via u^2 = tau v + rho u."""
        if coef is None:
            return frozenset()
        us = tuple(us)
        vs = tuple(vs)
        for i, e in enumerate(us):
            if e >= 2:
                lo = list(us)
                lo[i] = e - 2
                hi = list(vs)
                hi[i] += 1
                out: Set[Mono] = set()
                out ^= self.mono(self.coefs.mul(coef, TAU), lo, hi)
                lo2 = list(us)
                lo2[i] = e - 1
                out ^= self.mono(self.coefs.mul(coef, RHO), lo2, vs)
                return frozenset(out)
        return frozenset({(coef, us, vs)})

    def mul(self, m1: Mono, m2: Mono) -> Vec:
        c = self.coefs.mul(m1[0], m2[0])
        us = tuple(a + b for a, b in zip(m1[1], m2[1]))
        vs = tuple(a + b for a, b in zip(m1[2], m2[2]))
        return self.mono(c, us, vs)

    def scale(self, m: Mono, vec: Iterable[Mono]) -> Vec:
        out: Set[Mono] = set()
        for m2 in vec:
            out ^= self.mul(m, m2)
        return frozenset(out)

    @staticmethod
    def _split(mono: Mono) -> Optional[Tuple[str, int, Mono]]:
        (a, r, _e), us, vs = mono
        if a:
            return ("tau", -1, ((a - 1, r, 0), us, vs))
        if r:
            return ("rho", -1, ((0, r - 1, 0), us, vs))
        for i, e in enumerate(us):
            if e:
                lo = list(us)
                lo[i] = e - 1
                return ("u", i, (ONE, tuple(lo), vs))
        for i, e in enumerate(vs):
            if e:
                lo = list(vs)
                lo[i] = e - 1
                return ("v", i, (ONE, us, tuple(lo)))
        return None

    @staticmethod
    def _gen_actions(kind: str, i: int) -> Tuple[Tuple[int, Mono], ...]:
        if kind == "tau":
            return ((0, (TAU, _UNIT_U, _UNIT_U)), (1, (RHO, _UNIT_U, _UNIT_U)))
        if kind == "rho":
            return ((0, (RHO, _UNIT_U, _UNIT_U)),)
        one = tuple(1 if j == i else 0 for j in range(N_FACTORS))
        if kind == "u":
            return ((0, (ONE, one, _UNIT_U)), (1, (ONE, _UNIT_U, one)))
        two = tuple(2 if j == i else 0 for j in range(N_FACTORS))
        return ((0, (ONE, _UNIT_U, one)), (2, (ONE, _UNIT_U, two)))

    def sq_mono(self, k: int, mono: Mono) -> Vec:
        if k == 0:
            return frozenset({mono})
        key = (k, mono)
        hit = self._sq_memo.get(key)
        if hit is not None:
            return hit
        split = self._split(mono)
        if split is None:
            out: Vec = frozenset()
        else:
            kind, idx, rest = split
            tau_m = (TAU, _UNIT_U, _UNIT_U)
            rho_m = (RHO, _UNIT_U, _UNIT_U)
            acc: Set[Mono] = set()
            for j, gj in self._gen_actions(kind, idx):
                if j > k:
                    continue
                if k % 2 == 0:
                    part = self.scale(gj, self.sq_mono(k - j, rest))
                    acc ^= part if j % 2 == 0 else self.scale(tau_m, part)
                else:
                    acc ^= self.scale(gj, self.sq_mono(k - j, rest))
                    if j % 2 == 1 and k - 1 - j >= 0:
                        acc ^= self.scale(rho_m, self.scale(gj, self.sq_mono(k - 1 - j, rest)))
            out = frozenset(acc)
        self._sq_memo[key] = out
        return out

    def sq_vec(self, k: int, vec: Iterable[Mono]) -> Vec:
        out: Set[Mono] = set()
        for m in vec:
            out ^= self.sq_mono(k, m)
        return frozenset(out)

    def apply_word(self, word: Seq, probe: Mono) -> Vec:
        key = (word, probe)
        hit = self._word_memo.get(key)
        if hit is None:
            vec: Vec = frozenset({probe})
            for k in reversed(word):
                vec = self.sq_vec(k, vec)
            self._word_memo[key] = hit = vec
        return hit


def probe_stream(max_degree: int) -> List[Mono]:
    """Probes ordered cheap-first; large single v-powers cover high excess."""
    seen: Set[Mono] = set()
    ordered: List[Tuple[Tuple[int, int], Mono]] = []

    def put(us, vs, rank):
        m: Mono = (ONE, tuple(us), tuple(vs))
        if m not in seen:
            seen.add(m)
            deg = sum(us) + 2 * sum(vs)
            if deg:
                ordered.append(((rank, deg), m))

    for u0 in (0, 1):
        for u1 in (0, 1):
            for u2 in (0, 1):
                for v0 in range(0, 5):
                    for v1 in range(0, 3):
                        put((u0, u1, u2), (v0, v1, 0), 0)
    top = max_degree // 2 + 2
    for k in range(2, top):
        for l in range(0, min(k, 8) + 1):
            for v2 in (0, 1, 2):
                for mask in range(8):
                    us = ((mask >> 2) & 1, (mask >> 1) & 1, mask & 1)
                    put(us, (k, l, v2), 1)
    ordered.sort(key=lambda p: (p[0], p[1]))
    return [m for _, m in ordered]


class Deriver:
    def __init__(self, profile: BaseProfile, max_degree: int):
        self.profile = profile
        self.coefs = coef_ops(profile)
        self.space = ClassifyingSpace(self.coefs)
        self.probes = probe_stream(max_degree)

    def candidates_for(self, T: int, W: int, max_len: int = 3) -> List[Tuple[Coef, Seq]]:
        out: List[Tuple[Coef, Seq]] = []
        for seq in admissible_seqs(T):
            if len(seq) > max_len:
                continue
            dt, dw = seq_degree(seq)
            beta = T - dt
            alpha = W - dw - beta
            if beta < 0 or alpha < 0:
                continue
            coef = normalize_coef((alpha, beta, 0), self.profile)
            if coef is not None:
                out.append((coef, seq))
        return sorted(out, key=lambda t: (t[1], t[0]))

    def derive(self, a: int, b: int) -> FrozenSet[Tuple[Coef, Seq]]:
        """Expansion of the inadmissible composite Sq^a Sq^b (a < 2b)."""
        from .gf2 import kernel_basis, solve

        T = a + b
        W = a // 2 + b // 2
        cands = self.candidates_for(T, W)
        coords: Dict[Tuple[int, Mono], int] = {}
        rows = [0] * len(cands)
        target = 0

        def coord(probe_i: int, m: Mono) -> int:
            key = (probe_i, m)
            if key not in coords:
                coords[key] = len(coords)
            return coords[key]

        next_check = 4
        for probe_i, probe in enumerate(self.probes):
            for m in self.space.apply_word((a, b), probe):
                target |= 1 << coord(probe_i, m)
            for ci, (coef, seq) in enumerate(cands):
                img = self.space.apply_word(seq, probe)
                for m in self.space.scale((coef, _UNIT_U, _UNIT_U), img):
                    rows[ci] |= 1 << coord(probe_i, m)
            if probe_i + 1 < next_check or any(r == 0 for r in rows):
                continue
            next_check = probe_i + 1 + max(2, (probe_i + 1) // 3)
            combo = solve(rows, len(coords), target)
            if combo is None or kernel_basis(rows, len(coords)):
                continue
            terms = frozenset(cands[i] for i in range(len(cands)) if (combo >> i) & 1)
            for _, seq in terms:
                if len(seq) > 2:
                    raise AssertionError(f"unexpected long admissible in Sq^{a} Sq^{b}: {seq}")
            return terms
        raise AssertionError(f"probe set exhausted deriving Sq^{a} Sq^{b}")


def generate_table(max_degree: int, profile_kind: str = "Fq3", q: Optional[int] = 3,
                   verbose: bool = False) -> Dict[Tuple[int, int], FrozenSet[Tuple[Coef, Seq]]]:
    prof = BaseProfile(profile_kind, q)
    deriver = Deriver(prof, max_degree)
    table = {}
    for total in range(2, max_degree + 1):
        for a in range(1, total):
            b = total - a
            if 0 < a < 2 * b:
                table[(a, b)] = deriver.derive(a, b)
        if verbose:
            print(f"degree {total} done", file=sys.stderr)
    return table


def _write(path: str, table, header: str):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header)
        for (a, b) in sorted(table):
            fh.write(f"{a} {b} -> {element_str(table[(a, b)])}\n")


def write_tables(max_degree: int = DEFAULT_MAX_DEGREE,
                 max_degree_full: int = DEFAULT_MAX_DEGREE_FULL, verbose: bool = False):
    table = generate_table(max_degree, "Fq3", 3, verbose=verbose)
    _write(
        ADEM_TABLE_PATH,
        table,
        "# mod-2 motivic Adem relations, coefficients reduced modulo rho^2\n"
        f"# entries for all 0 < a < 2b with a + b <= {max_degree}\n",
    )
    full = generate_table(max_degree_full, "R", None, verbose=verbose)
    _write(
        ADEM_TABLE_FULL_PATH,
        full,
        "# mod-2 motivic Adem relations with full rho powers\n"
        f"# entries for all 0 < a < 2b with a + b <= {max_degree_full}\n",
    )
    # the two derivations must agree modulo rho^2 where they overlap
    fq3 = coef_ops(BaseProfile("Fq3", 3))
    for key, el in full.items():
        if key in table:
            reduced = set()
            for coef, seq in el:
                c = normalize_coef(coef, BaseProfile("Fq3", 3))
                if c is not None:
                    reduced ^= {(c, seq)}
            assert frozenset(reduced) == table[key], f"table mismatch at {key}"
    return table, full


if __name__ == "__main__":
    deg = int(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_MAX_DEGREE
    degf = int(sys.argv[2]) if len(sys.argv) > 2 else DEFAULT_MAX_DEGREE_FULL
    write_tables(max_degree=deg, max_degree_full=degf, verbose=True)
    print(f"wrote {ADEM_TABLE_PATH} (a+b <= {deg}) and {ADEM_TABLE_FULL_PATH} (a+b <= {degf})")
