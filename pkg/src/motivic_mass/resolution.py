"""Minimal free resolution of the base cohomology over the motivic
Steenrod algebra, built cell by cell in the (t + w, w) degree order.

Each stage scans bidegree cells in the order < and covers the kernel of
the previous differential by new generators exactly where multiples of
the generators already chosen fall short, which is what minimality
means here.  All linear algebra is GF(2) on int bitsets.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .adem import SteenrodAlgebra, Seq, algebra, seq_degree
from .base import BaseProfile, Coef, ONE, coef_degree, coef_str, parse_coef
from .gf2 import Subspace, image_and_kernel

ModTerm = Tuple[int, Coef, Seq]  # coef . Sq^seq . h_{f-1}(j)
ModVec = FrozenSet[ModTerm]

FORMAT_VERSION = "motres-1"


def prec_key(deg: Tuple[int, int]) -> Tuple[int, int]:
    """Sort key realizing the degree order: by t + w, then by w."""
    t, w = deg
    return (t + w, w)


class ResolutionError(Exception):
    pass


class CheckpointError(ResolutionError):
    pass


class Resolution:
    """Chain data of the minimal resolution through (t <= max_t, f <= max_f)."""

    def __init__(self, profile: BaseProfile, max_t: int, max_f: int):
        self.profile = profile
        self.alg: SteenrodAlgebra = algebra(profile)
        self.max_t = max_t
        self.max_f = max_f
        self.gens: List[List[Tuple[int, int]]] = [[(0, 0)]]
        self.diffs: List[List[ModVec]] = [[]]
        self._dp: Dict[int, Dict[Tuple[int, Seq], ModVec]] = {}

    # -- structure accessors ----------------------------------------------

    def n_gens(self, f: int) -> int:
        return len(self.gens[f]) if f < len(self.gens) else 0

    def gen_degrees(self, f: int) -> List[Tuple[int, int]]:
        return list(self.gens[f]) if f < len(self.gens) else []

    def differential(self, f: int, j: int) -> ModVec:
        return self.diffs[f][j]

    # -- module arithmetic --------------------------------------------------

    def left_mul_sq(self, k: int, vec: Iterable[ModTerm]) -> Set[ModTerm]:
        alg = self.alg
        out: Set[ModTerm] = set()
        toggle = out.symmetric_difference_update
        for j, coef, seq in vec:
            for c2, k2 in alg.commute(k, coef):
                if k2 == 0:
                    toggle(((j, c2, seq),))
                    continue
                for c3, s3 in alg.reduce_seq(k2, seq):
                    c4 = alg.coefs.mul(c2, c3)
                    if c4 is not None:
                        toggle(((j, c4, s3),))
        return out

    def scale_vec(self, coef: Coef, vec: Iterable[ModTerm]) -> Set[ModTerm]:
        alg = self.alg
        out: Set[ModTerm] = set()
        for j, c, seq in vec:
            c2 = alg.coefs.mul(coef, c)
            if c2 is not None:
                out.symmetric_difference_update(((j, c2, seq),))
        return out

    def act(self, el, vec: Iterable[ModTerm]) -> Set[ModTerm]:
        """Apply an algebra element to a module vector."""
        out: Set[ModTerm] = set()
        base = set(vec)
        for coef, seq in el:
            part: Set[ModTerm] = base
            for k in reversed(seq):
                part = self.left_mul_sq(k, part)
            out ^= self.scale_vec(coef, part)
        return out

    def _dp_get(self, f: int, j: int, seq: Seq) -> ModVec:
        """Sq^seq applied to d(h_f(j)), cached per stage."""
        dp = self._dp.setdefault(f, {})
        key = (j, seq)
        hit = dp.get(key)
        if hit is not None:
            return hit
        if not seq:
            val: ModVec = self.diffs[f][j]
        else:
            val = frozenset(self.left_mul_sq(seq[0], self._dp_get(f, j, seq[1:])))
        dp[key] = val
        return val

    def term_degree(self, f_minus_1: int, term: ModTerm) -> Tuple[int, int]:
        j, coef, seq = term
        gt, gw = self.gens[f_minus_1][j]
        ct, cw = coef_degree(coef)
        st, sw = seq_degree(seq)
        return (gt + ct + st, gw + cw + sw)

    # -- cell machinery ------------------------------------------------------

    def cell_basis(self, f: int, t: int, w: int) -> List[ModTerm]:
        """Ordered basis of P^f in bidegree (t, w)."""
        out: List[ModTerm] = []
        if f >= len(self.gens):
            return out
        for j, (gt, gw) in enumerate(self.gens[f]):
            if gt > t or gw > w:
                continue
            for coef, seq in self.alg.basis_in_bidegree(t - gt, w - gw):
                out.append((j, coef, seq))
        return out

    def _cells_in_order(self, max_t: int) -> List[Tuple[int, int]]:
        cells = [(t, w) for t in range(0, max_t + 1) for w in range(0, t + 1)]
        cells.sort(key=prec_key)
        return cells

    def _augmentation_rows(self, basis: List[ModTerm]) -> Tuple[List[int], int]:
        coords: Dict[Coef, int] = {}
        rows = []
        for _j, coef, seq in basis:
            if seq:
                rows.append(0)
            else:
                if coef not in coords:
                    coords[coef] = len(coords)
                rows.append(1 << coords[coef])
        return rows, max(1, len(coords))

    def _image_rows(self, f: int, basis: List[ModTerm], workers: int = 1) -> Tuple[List[int], int]:
        """Images under d_f of the stage-f cell basis, packed to bits."""
        coords: Dict[ModTerm, int] = {}
        vecs: List[ModVec] = []
        if workers > 1 and len(basis) > 8:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                vecs = list(pool.map(lambda b: frozenset(self.scale_vec(b[1], self._dp_get(f, b[0], b[2]))), basis))
        else:
            for j, coef, seq in basis:
                vecs.append(frozenset(self.scale_vec(coef, self._dp_get(f, j, seq))))
        rows = []
        for vec in vecs:
            row = 0
            for term in sorted(vec):
                if term not in coords:
                    coords[term] = len(coords)
                row |= 1 << coords[term]
            rows.append(row)
        return rows, max(1, len(coords))

    # -- the builder ---------------------------------------------------------

    def extend(self, max_t: Optional[int] = None, max_f: Optional[int] = None,
               workers: int = 1, progress=None):
        """Build stages up to max_f over cells with t <= max_t."""
        new_t = self.max_t if max_t is None else max_t
        new_f = self.max_f if max_f is None else max_f
        if new_t < self.max_t or new_f < self.max_f:
            raise ResolutionError("target bound must contain the current bound")
        old_t, old_f = self.max_t, self.max_f
        self.max_t, self.max_f = new_t, new_f
        for f in range(1, new_f + 1):
            fresh_stage = f >= len(self.gens)
            if not fresh_stage and new_t <= old_t and f <= old_f:
                continue
            self._build_stage(f, skip_t=None if fresh_stage else old_t, workers=workers)
            if progress:
                progress(f, len(self.gens[f]))
            self._dp.pop(f - 2, None)
        self._dp.clear()

    def _build_stage(self, f: int, skip_t: Optional[int], workers: int):
        if f >= len(self.gens):
            self.gens.append([])
            self.diffs.append([])
        gens_f = self.gens[f]
        diffs_f = self.diffs[f]
        rebuilt: List[Tuple[int, int]] = []
        rebuilt_d: List[ModVec] = []
        old_by_cell: Dict[Tuple[int, int], List[ModVec]] = {}
        for (deg, d) in zip(gens_f, diffs_f):
            old_by_cell.setdefault(deg, []).append(d)
        index_map: Dict[int, int] = {}

        for (t, w) in self._cells_in_order(self.max_t):
            if skip_t is not None and t <= skip_t:
                # cell was processed under the previous bound; replay it
                for d in old_by_cell.get((t, w), ()):
                    rebuilt.append((t, w))
                    rebuilt_d.append(d)
                continue
            basis1 = self.cell_basis(f - 1, t, w)
            if not basis1:
                continue
            if f == 1:
                rows, width = self._augmentation_rows(basis1)
            else:
                rows, width = self._image_rows(f - 1, basis1, workers=workers)
            _img, kers = image_and_kernel(rows, width)
            if not kers:
                continue
            # span already hit by multiples of generators chosen so far
            covered = Subspace()
            pos = {term: i for i, term in enumerate(basis1)}
            for jp, (gt, gw) in enumerate(rebuilt):
                if gt > t or gw > w:
                    continue
                for coef, seq in self.alg.basis_in_bidegree(t - gt, w - gw):
                    vec = self.scale_vec(coef, self._stage_dp(f, jp, seq, rebuilt_d))
                    covered.add(self._pack(vec, pos))
            for kv in kers:
                r = covered.reduce(kv)
                if r:
                    covered.add(r)
                    rebuilt.append((t, w))
                    rebuilt_d.append(self._unpack(r, basis1))
        # stage complete -- replace in scan order (deterministic)
        self.gens[f] = rebuilt
        self.diffs[f] = rebuilt_d
        self._dp.pop(f, None)

    def _stage_dp(self, f: int, j: int, seq: Seq, diffs_f: List[ModVec]) -> ModVec:
        dp = self._dp.setdefault(f, {})
        key = (j, seq)
        hit = dp.get(key)
        if hit is not None:
            return hit
        if not seq:
            val: ModVec = diffs_f[j]
        else:
            val = frozenset(self.left_mul_sq(seq[0], self._stage_dp(f, j, seq[1:], diffs_f)))
        dp[key] = val
        return val

    @staticmethod
    def _pack(vec: Iterable[ModTerm], pos: Dict[ModTerm, int]) -> int:
        row = 0
        for term in vec:
            row |= 1 << pos[term]
        return row

    @staticmethod
    def _unpack(row: int, basis: List[ModTerm]) -> ModVec:
        out = set()
        i = 0
        while row:
            if row & 1:
                out.add(basis[i])
            row >>= 1
            i += 1
        return frozenset(out)

    # -- verification ---------------------------------------------------------

    def verify(self, max_t: Optional[int] = None) -> List[str]:
        """d o d = 0, ordering, non-redundancy and degree-minimality."""
        problems: List[str] = []
        limit = self.max_t if max_t is None else max_t
        for f in range(2, len(self.gens)):
            for k, d in enumerate(self.diffs[f]):
                dd = set()
                for j, coef, seq in d:
                    part: Set[ModTerm] = set(self.diffs[f - 1][j])
                    for i in reversed(seq):
                        part = self.left_mul_sq(i, part)
                    dd ^= self.scale_vec(coef, part)
                if dd:
                    problems.append(f"d o d != 0 at (f={f}, k={k})")
        for f in range(1, len(self.gens)):
            degs = [prec_key(d) for d in self.gens[f]]
            if degs != sorted(degs):
                problems.append(f"generator ordering violated at f={f}")
        if len(self.gens) > 1:
            for k, d in enumerate(self.diffs[1]):
                if any(not seq for _j, _c, seq in d):
                    problems.append(f"stage-1 image not in the augmentation ideal at k={k}")
        for f in range(1, len(self.gens)):
            problems.extend(self._verify_minimal_stage(f, limit))
        return problems

    def _verify_minimal_stage(self, f: int, limit: int) -> List[str]:
        problems = []
        by_cell: Dict[Tuple[int, int], List[int]] = {}
        for k, deg in enumerate(self.gens[f]):
            by_cell.setdefault(deg, []).append(k)
        self._dp.pop(f, None)
        for (t, w) in self._cells_in_order(limit):
            basis1 = self.cell_basis(f - 1, t, w)
            if not basis1:
                if by_cell.get((t, w)):
                    problems.append(f"generator in empty cell at f={f}, deg=({t},{w})")
                continue
            if f == 1:
                rows, width = self._augmentation_rows(basis1)
            else:
                rows, width = self._image_rows(f - 1, basis1)
            _img, kers = image_and_kernel(rows, width)
            kspan = Subspace(kers)
            pos = {term: i for i, term in enumerate(basis1)}
            covered = Subspace()
            for jp, (gt, gw) in enumerate(self.gens[f]):
                if gt > t or gw > w or prec_key((gt, gw)) > prec_key((t, w)):
                    continue
                for coef, seq in self.alg.basis_in_bidegree(t - gt, w - gw):
                    vec = self.scale_vec(coef, self._dp_get(f, jp, seq))
                    row = 0
                    ok = True
                    for term in vec:
                        if term not in pos:
                            ok = False
                            break
                        row |= 1 << pos[term]
                    if not ok:
                        problems.append(f"image leaves cell at f={f}, gen {jp}")
                        continue
                    if (gt, gw) == (t, w) and seq == () and coef == ONE:
                        # the generator's own image must be new and a kernel elt
                        if row in covered:
                            problems.append(f"redundant generator at f={f}, j={jp}")
                        if kspan.reduce(row) != 0:
                            problems.append(f"image not a cycle at f={f}, j={jp}")
                    covered.add(row)
            if covered.dim != kspan.dim:
                problems.append(
                    f"kernel not covered at f={f}, deg=({t},{w}): "
                    f"covered {covered.dim} of {kspan.dim}"
                )
        self._dp.pop(f, None)
        return problems

    # -- persistence ------------------------------------------------------------

    def save(self, path: str):
        body = []
        for f in range(1, len(self.gens)):
            for j, (t, w) in enumerate(self.gens[f]):
                body.append(f"gen {f} {j} {t} {w}")
        for f in range(1, len(self.diffs)):
            for k, d in enumerate(self.diffs[f]):
                terms = sorted(d)
                enc = " ; ".join(
                    f"{coef_str(coef)}|{','.join(map(str, seq))}|{j}" for j, coef, seq in terms
                )
                body.append(f"d {f} {k} -> {enc}")
        payload = "\n".join(body) + "\n"
        digest = hashlib.sha256(payload.encode("ascii")).hexdigest()
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{FORMAT_VERSION}\n")
            fh.write(f"profile {self.profile.describe()}\n")
            fh.write(f"bound {self.max_t} {self.max_f}\n")
            fh.write(f"sha256 {digest}\n")
            fh.write(payload)

    @classmethod
    def load(cls, path: str, profile: Optional[BaseProfile] = None) -> "Resolution":
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format: {lines[:1]}")
        if not lines[1].startswith("profile ") or not lines[2].startswith("bound "):
            raise CheckpointError("malformed checkpoint header")
        described = lines[1][len("profile "):]
        if profile is not None and profile.describe() != described:
            raise CheckpointError(
                f"profile mismatch: checkpoint has {described}, requested {profile.describe()}"
            )
        max_t, max_f = (int(x) for x in lines[2].split()[1:3])
        digest = lines[3].split()[1]
        payload = "\n".join(lines[4:]) + "\n"
        if hashlib.sha256(payload.encode("ascii")).hexdigest() != digest:
            raise CheckpointError("checkpoint checksum mismatch")
        prof = profile if profile is not None else _parse_profile(described)
        res = cls(prof, max_t, max_f)
        for line in lines[4:]:
            if not line:
                continue
            parts = line.split()
            if parts[0] == "gen":
                f, j, t, w = (int(x) for x in parts[1:5])
                while len(res.gens) <= f:
                    res.gens.append([])
                    res.diffs.append([])
                if len(res.gens[f]) != j:
                    raise CheckpointError(f"generator indices out of order at f={f}")
                res.gens[f].append((t, w))
                res.diffs[f].append(frozenset())
            elif parts[0] == "d":
                f, k = int(parts[1]), int(parts[2])
                enc = line.split("->", 1)[1].strip()
                terms = set()
                if enc:
                    for item in enc.split(" ; "):
                        coef_s, seq_s, j_s = item.split("|")
                        seq = tuple(int(x) for x in seq_s.split(",")) if seq_s else ()
                        terms.add((int(j_s), parse_coef(coef_s), seq))
                res.diffs[f][k] = frozenset(terms)
        return res


def _parse_profile(described: str) -> BaseProfile:
    if "(" in described:
        kind, rest = described.split("(", 1)
        q = int(rest.rstrip(")").split("=")[1])
        return BaseProfile(kind, q)
    return BaseProfile(described)


def build_resolution(profile: BaseProfile, max_stem: int, max_filtration: int,
                     workers: int = 1, progress=None) -> Resolution:
    """CLI-facing constructor: users think in chart coordinates."""
    max_t = max_stem + max_filtration + 1
    res = Resolution(profile, max_t, max_filtration + 1)
    res.extend(workers=workers, progress=progress)
    return res
