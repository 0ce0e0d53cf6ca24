"""Ext over the motivic Steenrod algebra: dualize the minimal resolution,
take cohomology per tridegree, and compute composition products by
lifting cocycles to chain maps.

Chart coordinates throughout: a class in Ext^{f,(s+f,w)} is keyed by
(f, s, w); a cochain in degree (f, s, w) sends the generator h_f(j) to an
element of H of cohomological bidegree deg h_f(j) - (s + f, w).
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .adem import Seq
from .base import Coef, ONE, RHO, TAU, U, coef_degree, coef_str
from .gf2 import Subspace, image_and_kernel, solve
from .resolution import ModTerm, ModVec, Resolution

CellKey = Tuple[int, int, int]  # (f, s, w)
HomCoord = Tuple[int, Coef]  # (generator index, value monomial)

# Irreducible classes of the Ext ring by (f, s, w), as tabulated for each
# base field; coefficient-type classes are listed separately because
# their irreducibility is decided inside the coefficient monoid.
DICT_C: Dict[str, CellKey] = {
    "tau": (0, 0, -1),
    "h0": (1, 0, 0), "h1": (1, 1, 1), "h2": (1, 3, 2), "h3": (1, 7, 4),
    "c0": (3, 8, 5), "Ph1": (5, 9, 5), "Ph2": (5, 11, 6), "d0": (4, 14, 8),
    "h4": (1, 15, 8), "Pc0": (7, 16, 9), "e0": (4, 17, 10), "P2h1": (9, 17, 9),
    "f0": (4, 18, 10), "P2h2": (9, 19, 10), "c1": (3, 19, 11), "[tau g]": (4, 20, 11),
}

DICT_FQ1: Dict[str, CellKey] = dict(DICT_C)
DICT_FQ1["u"] = (0, -1, -1)

DICT_FQ3: Dict[str, CellKey] = {
    "rho": (0, -1, -1), "[rho tau]": (0, -1, -2), "[tau^2]": (0, 0, -2),
    "h0": (1, 0, 0), "h1": (1, 1, 1), "[tau h1]": (1, 1, 0), "h2": (1, 3, 2),
    "[tau h2^2]": (2, 6, 3), "h3": (1, 7, 4), "[tau h0^3 h3]": (4, 7, 3),
    "c0": (3, 8, 5), "[tau c0]": (3, 8, 4), "Ph1": (5, 9, 5), "[tau Ph1]": (5, 9, 4),
    "Ph2": (5, 11, 6), "[tau h0 h3^2]": (3, 14, 7), "d0": (4, 14, 8),
    "[tau h0^2 d0]": (6, 14, 7), "h4": (1, 15, 8), "[tau h0^7 h4]": (8, 15, 7),
    "Pc0": (7, 16, 9), "[tau Pc0]": (7, 16, 8), "e0": (4, 17, 10), "P2h1": (9, 17, 9),
    "[tau P2h1]": (9, 17, 8), "f0": (4, 18, 10), "P2h2": (9, 19, 10), "c1": (3, 19, 11),
    "[tau c1]": (3, 19, 10), "[rho tau g]": (4, 19, 10), "[tau^2 g]": (4, 20, 10),
}


def dictionary_for(kind: str) -> Dict[str, CellKey]:
    return {"C": DICT_C, "Fq1": DICT_FQ1, "Fq3": DICT_FQ3}[kind]


def coef_class_names(kind: str) -> Dict[str, Coef]:
    """Coefficient-ring Ext^0 irreducibles, as dual monomials."""
    if kind == "C":
        return {"tau": TAU}
    if kind == "Fq1":
        return {"tau": TAU, "u": U}
    if kind == "Fq3":
        return {"[tau^2]": (2, 0, 0), "rho": RHO, "[rho tau]": (1, 1, 0)}
    raise ValueError(f"no class dictionary for base {kind}")


class ExtError(Exception):
    pass


class Cell:
    __slots__ = ("coords", "pos", "reps", "image", "boundary_rows")

    def __init__(self, coords: List[HomCoord], reps: List[int], image: Subspace,
                 boundary_rows: List[int]):
        self.coords = coords
        self.pos = {c: i for i, c in enumerate(coords)}
        self.reps = reps
        self.image = image
        self.boundary_rows = boundary_rows

    @property
    def dim(self) -> int:
        return len(self.reps)


class LiftedClass:
    """A cocycle with the chain-map lift used for composition products."""

    __slots__ = ("name", "key", "cochain", "stages")

    def __init__(self, name: str, key: CellKey, cochain: FrozenSet[HomCoord]):
        self.name = name
        self.key = key
        self.cochain = cochain
        # stages[k]: list over generators of P^{f_y + k} of vectors in P^k
        self.stages: List[List[ModVec]] = []


class ExtTable:
    def __init__(self, res: Resolution, s_min: int = -3, s_max: Optional[int] = None,
                 w_min: Optional[int] = None, w_max: Optional[int] = None):
        self.res = res
        self.profile = res.profile
        self.alg = res.alg
        self.max_f = res.max_f - 1
        self.max_t = res.max_t
        self.s_min = s_min
        self.s_max = res.max_t - 1 if s_max is None else s_max
        self.w_min = -(res.max_t // 2 + 4) if w_min is None else w_min
        self.w_max = res.max_t if w_max is None else w_max
        self.cells: Dict[CellKey, Cell] = {}
        self._solve_cache: Dict[Tuple[int, int, int], Tuple[List[ModTerm], Dict[ModTerm, int], List[int]]] = {}
        self.computed = False

    # -- cochain cells -----------------------------------------------------

    def hom_coords(self, f: int, s: int, w: int) -> List[HomCoord]:
        t = s + f
        out: List[HomCoord] = []
        for j, (gt, gw) in enumerate(self.res.gen_degrees(f)):
            for m in self.alg.coef_monomials_in_degree(gt - t, gw - w):
                out.append((j, m))
        return out

    def _act_on_value(self, coef: Coef, seq: Seq, m: Coef) -> Tuple[Coef, ...]:
        """coef . Sq^seq applied to a coefficient value."""
        ops = self.alg.coefs
        out: Dict[Coef, int] = {}
        for m2 in ops.sq_seq(seq, m):
            m3 = ops.mul(coef, m2)
            if m3 is not None:
                out[m3] = out.get(m3, 0) ^ 1
        return tuple(sorted(mm for mm, c in out.items() if c))

    def delta_rows(self, f: int, s: int, w: int, coords: List[HomCoord],
                   tgt_pos: Dict[HomCoord, int]) -> List[int]:
        """Matrix of the dual differential Hom(P^f) -> Hom(P^{f+1})."""
        rows = []
        diffs = self.res.diffs[f + 1] if f + 1 < len(self.res.diffs) else []
        by_source: Dict[int, List[Tuple[int, Coef, Seq]]] = {}
        for k, d in enumerate(diffs):
            for j, coef, seq in d:
                by_source.setdefault(j, []).append((k, coef, seq))
        for (j, m) in coords:
            row = 0
            for k, coef, seq in by_source.get(j, ()):
                for m2 in self._act_on_value(coef, seq, m):
                    p = tgt_pos.get((k, m2))
                    if p is None:
                        raise ExtError(f"dual image leaves window at f={f},(s,w)=({s},{w})")
                    row ^= 1 << p
            rows.append(row)
        return rows

    def compute(self):
        if self.computed:
            return self
        for f in range(0, self.max_f + 1):
            for s in range(self.s_min, self.s_max + 1):
                if s + f > self.max_t - 1 or s + f < -1:
                    continue
                for w in range(self.w_min, self.w_max + 1):
                    self._compute_cell(f, s, w)
        self.computed = True
        return self

    def _compute_cell(self, f: int, s: int, w: int):
        coords = self.hom_coords(f, s, w)
        if not coords:
            return
        tgt = self.hom_coords(f + 1, s - 1, w)
        tgt_pos = {c: i for i, c in enumerate(tgt)}
        rows = self.delta_rows(f, s, w, coords, tgt_pos)
        _img, kers = image_and_kernel(rows, max(1, len(tgt)))
        if f == 0:
            boundary: List[int] = []
        else:
            src = self.hom_coords(f - 1, s + 1, w)
            pos = {c: i for i, c in enumerate(coords)}
            boundary = [r for r in self.delta_rows(f - 1, s + 1, w, src, pos) if r]
        image = Subspace(boundary)
        reps_space = Subspace()
        reps: List[int] = []
        for kv in kers:
            r = image.reduce(kv)
            r = reps_space.reduce(r)
            if r:
                reps_space.add(r)
                reps.append(r)
        if reps or coords:
            self.cells[(f, s, w)] = Cell(coords, reps, image, boundary)

    def cell(self, key: CellKey) -> Optional[Cell]:
        return self.cells.get(key)

    def dim(self, f: int, s: int, w: int) -> int:
        c = self.cells.get((f, s, w))
        return c.dim if c else 0

    def in_window(self, f: int, s: int, w: int) -> bool:
        return (0 <= f <= self.max_f and self.s_min <= s <= self.s_max
                and self.w_min <= w <= self.w_max and -1 <= s + f <= self.max_t - 1)

    # -- class representations ------------------------------------------------

    def rep_to_cochain(self, key: CellKey, vec: int) -> FrozenSet[HomCoord]:
        cell = self.cells[key]
        out: Set[HomCoord] = set()
        acc = 0
        for i, r in enumerate(cell.reps):
            if (vec >> i) & 1:
                acc ^= r
        i = 0
        while acc:
            if acc & 1:
                out.add(cell.coords[i])
            acc >>= 1
            i += 1
        return frozenset(out)

    def project(self, key: CellKey, cocycle: FrozenSet[HomCoord]) -> int:
        """Express a cocycle in the cell's reduced basis, mod boundaries."""
        cell = self.cells.get(key)
        if cell is None:
            if cocycle:
                raise ExtError(f"nonzero cocycle in missing cell {key}")
            return 0
        target = 0
        for c in cocycle:
            p = cell.pos.get(c)
            if p is None:
                raise ExtError(f"cocycle coordinate {c} outside cell {key}")
            target ^= 1 << p
        rows = list(cell.reps) + cell.boundary_rows
        combo = solve(rows, len(cell.coords), target)
        if combo is None:
            raise ExtError(f"value is not a cocycle class in cell {key}")
        return combo & ((1 << len(cell.reps)) - 1)

    # -- products ----------------------------------------------------------------

    def coef_shift(self, m: Coef) -> Tuple[int, int]:
        ct, cw = coef_degree(m)
        return (-ct, -cw)

    def coef_multiply(self, m: Coef, key: CellKey, vec: int) -> Tuple[CellKey, int]:
        """Multiplication by a central coefficient class (dual of m)."""
        f, s, w = key
        ds, dw = self.coef_shift(m)
        tgt: CellKey = (f, s + ds, w + dw)
        cochain = self.rep_to_cochain(key, vec)
        out: Set[HomCoord] = set()
        for (j, m0) in cochain:
            m2 = self.alg.coefs.mul(m, m0)
            if m2 is not None:
                out ^= {(j, m2)}
        return tgt, self.project(tgt, frozenset(out))

    def _solve_cell(self, k: int, t: int, w: int):
        """Basis and differential rows of P^k in a cohomological cell."""
        keyc = (k, t, w)
        hit = self._solve_cache.get(keyc)
        if hit is not None:
            return hit
        res = self.res
        basis = res.cell_basis(k, t, w)
        coords: Dict[ModTerm, int] = {}
        rows: List[int] = []
        for j, coef, seq in basis:
            vec = res.scale_vec(coef, res._dp_get(k, j, seq))
            row = 0
            for term in sorted(vec):
                if term not in coords:
                    coords[term] = len(coords)
                row |= 1 << coords[term]
            rows.append(row)
        out = (basis, coords, rows)
        self._solve_cache[keyc] = out
        return out

    def lift(self, y: LiftedClass, up_to_stage: int):
        """Extend the chain lift of y through the requested stage."""
        res = self.res
        fy = y.key[0]
        ty = y.key[0] + y.key[1]
        wy = y.key[2]
        if not y.stages:
            values: Dict[int, Set[Coef]] = {}
            for j, m in y.cochain:
                values.setdefault(j, set()).add(m)
            stage0 = []
            for j in range(res.n_gens(fy)):
                stage0.append(frozenset((0, m, ()) for m in values.get(j, ())))
            y.stages.append(stage0)
        while len(y.stages) <= up_to_stage:
            k = len(y.stages)
            prev = y.stages[k - 1]
            cur: List[ModVec] = []
            for h, (ht, hw) in enumerate(res.gen_degrees(fy + k)):
                rhs: Set[ModTerm] = set()
                for j, coef, seq in res.diffs[fy + k][h]:
                    part: Set[ModTerm] = set(prev[j])
                    for i in reversed(seq):
                        part = res.left_mul_sq(i, part)
                    rhs ^= res.scale_vec(coef, part)
                if not rhs:
                    cur.append(frozenset())
                    continue
                basis, coords, rows = self._solve_cell(k, ht - ty, hw - wy)
                target = 0
                ok = True
                for term in rhs:
                    p = coords.get(term)
                    if p is None:
                        ok = False
                        break
                    target |= 1 << p
                combo = None if not ok else solve(rows, max(1, len(coords)), target)
                if combo is None:
                    raise ExtError(
                        f"chain lift of {y.name} failed at stage {k}, generator {h}"
                    )
                z = set()
                for i in range(len(basis)):
                    if (combo >> i) & 1:
                        z.add(basis[i])
                cur.append(frozenset(z))
            y.stages.append(cur)
        return y

    def product(self, key_x: CellKey, vec_x: int, y: LiftedClass) -> Tuple[CellKey, int]:
        """x . y via the chain-map lift of y evaluated against x."""
        fx, sx, wx = key_x
        fy, sy, wy = y.key
        tgt: CellKey = (fx + fy, sx + sy, wx + wy)
        self.lift(y, fx)
        phi = y.stages[fx]
        xco = self.rep_to_cochain(key_x, vec_x)
        values: Dict[int, Set[Coef]] = {}
        for j, m in xco:
            values.setdefault(j, set()).add(m)
        out: Set[HomCoord] = set()
        for h in range(self.res.n_gens(fx + fy)):
            acc: Dict[Coef, int] = {}
            for j, coef, seq in phi[h]:
                for m in values.get(j, ()):
                    for m2 in self._act_on_value(coef, seq, m):
                        acc[m2] = acc.get(m2, 0) ^ 1
            for m2, c in acc.items():
                if c:
                    out ^= {(h, m2)}
        return tgt, self.project(tgt, frozenset(out))


class ClassInfo:
    __slots__ = ("name", "key", "vec", "divisible", "coef_monomial")

    def __init__(self, name: str, key: CellKey, vec: int,
                 divisible: bool = False, coef_monomial: Optional[Coef] = None):
        self.name = name
        self.key = key
        self.vec = vec
        self.divisible = divisible
        self.coef_monomial = coef_monomial


class ExtRing:
    """Named generators, irreducibility bookkeeping and product operators."""

    def __init__(self, table: ExtTable, analysis_s_max: int = 21, analysis_f_max: Optional[int] = None):
        self.table = table.compute()
        self.kind = table.profile.kind
        self.s_max = analysis_s_max
        self.f_max = table.max_f if analysis_f_max is None else analysis_f_max
        self.coef_classes: Dict[str, ClassInfo] = {}
        self.generators: Dict[str, ClassInfo] = {}  # positive filtration
        self.lifts: Dict[str, LiftedClass] = {}
        self.irreducible: Dict[CellKey, List[str]] = {}
        self.problems: List[str] = []
        self._div_ops: List[Coef] = []
        self._decomp: Dict[Tuple[CellKey, int], Tuple[str, CellKey, int]] = {}
        self._analyzed = False

    # -- generic multiplication ------------------------------------------------

    def multiply_by(self, name: str, key: CellKey, vec: int) -> Tuple[CellKey, int]:
        info = self.coef_classes.get(name)
        if info is not None:
            return self.table.coef_multiply(info.coef_monomial, key, vec)
        return self.table.product(key, vec, self.lifts[name])

    def class_of(self, name: str) -> ClassInfo:
        if name in self.coef_classes:
            return self.coef_classes[name]
        return self.generators[name]

    def unit(self) -> Tuple[CellKey, int]:
        key = (0, 0, 0)
        return key, self.table.project(key, frozenset({(0, ONE)}))

    def eval_monomial(self, powers: Sequence[Tuple[str, int]]) -> Tuple[CellKey, int]:
        """Evaluate a product of named generators with exponents."""
        key, vec = self.unit()
        for name, e in powers:
            for _ in range(e):
                key, vec = self.multiply_by(name, key, vec)
                if vec == 0:
                    return key, 0
        return key, vec

    # -- irreducibility analysis -------------------------------------------------

    def analyze(self):
        if self._analyzed:
            return self
        self._setup_coefficient_classes()
        table = self.table
        for f in range(1, self.f_max + 1):
            cells = sorted(
                key for key in table.cells
                if key[0] == f and self.table.s_min <= key[1] <= self.s_max + 1
            )
            for key in cells:
                self._analyze_cell(key)
        self._analyzed = True
        return self

    def _setup_coefficient_classes(self):
        table = self.table
        for name, m in coef_class_names(self.kind).items():
            ds, dw = table.coef_shift(m)
            key = (0, ds, dw)
            cell = table.cell(key)
            if cell is None or cell.dim == 0:
                self.problems.append(f"coefficient class {name} missing at {key}")
                continue
            vec = table.project(key, frozenset({(0, m)}))
            if vec == 0:
                self.problems.append(f"coefficient class {name} vanishes at {key}")
                continue
            self.coef_classes[name] = ClassInfo(name, key, vec, False, m)
            self.irreducible.setdefault(key, []).append(name)
        # divisibility detectors: u, rho and rho*tau multiples are "squares"
        if self.kind == "Fq1":
            self._div_ops = [U]
        elif self.kind == "Fq3":
            self._div_ops = [RHO, (1, 1, 0)]
        else:
            self._div_ops = []

    def _decomposable_span(self, key: CellKey) -> Tuple[Subspace, List[Tuple[str, CellKey, int]]]:
        f, s, w = key
        table = self.table
        span = Subspace()
        tags: List[Tuple[str, CellKey, int]] = []
        for name, info in self.coef_classes.items():
            ds, dw = table.coef_shift(info.coef_monomial)
            src: CellKey = (f, s - ds, w - dw)
            cell = table.cell(src)
            if cell is None or not table.in_window(*src):
                continue
            for i in range(cell.dim):
                tgt, vec = table.coef_multiply(info.coef_monomial, src, 1 << i)
                if vec and span.add(vec):
                    tags.append((name, src, 1 << i))
        for name, info in self.generators.items():
            fg, sg, wg = info.key
            if fg >= f or fg < 1:
                continue
            src = (f - fg, s - sg, w - wg)
            cell = table.cell(src)
            if cell is None:
                continue
            for i in range(cell.dim):
                tgt, vec = table.product(src, 1 << i, self.lifts[name])
                if vec and span.add(vec):
                    tags.append((name, src, 1 << i))
        return span, tags

    def _analyze_cell(self, key: CellKey):
        table = self.table
        cell = table.cell(key)
        if cell is None or cell.dim == 0:
            return
        span, _tags = self._decomposable_span(key)
        extra = cell.dim - span.dim
        if extra <= 0:
            return
        residues = Subspace()
        new_vecs: List[int] = []
        for i in range(cell.dim):
            r = span.reduce(1 << i)
            r = residues.reduce(r)
            if r:
                residues.add(r)
                new_vecs.append(r)
        names = dictionary_for(self.kind)
        claimed = [n for n, k in names.items() if k == key]
        for idx, vec in enumerate(new_vecs):
            if idx < len(claimed):
                name = claimed[idx]
            else:
                name = f"x({key[0]},{key[1]},{key[2]})" + ("" if idx == 0 else f"#{idx}")
            info = ClassInfo(name, key, vec, self._is_divisible(key, vec))
            self.generators[name] = info
            self.lifts[name] = LiftedClass(name, key, table.rep_to_cochain(key, vec))
            self.irreducible.setdefault(key, []).append(name)
        if claimed and len(new_vecs) != len(claimed):
            self.problems.append(
                f"cell {key}: dictionary lists {claimed} but found {len(new_vecs)} irreducibles"
            )

    def _is_divisible(self, key: CellKey, vec: int) -> bool:
        f, s, w = key
        table = self.table
        span = Subspace()
        for m in self._div_ops:
            ds, dw = table.coef_shift(m)
            src = (f, s - ds, w - dw)
            cell = table.cell(src)
            if cell is None:
                continue
            for i in range(cell.dim):
                _tgt, v = table.coef_multiply(m, src, 1 << i)
                if v:
                    span.add(v)
        return vec in span

    def divisible(self, key: CellKey, vec: int) -> bool:
        return self._is_divisible(key, vec)

    # -- reports ---------------------------------------------------------------

    def name_report(self, s_lo: int = -1, s_hi: int = 21) -> Dict[str, List[str]]:
        """Compare computed irreducibles against the built-in dictionary."""
        self.analyze()
        names = dictionary_for(self.kind)
        found = {info.key for info in self.generators.values()
                 if not info.name.startswith("x(")}
        found |= {info.key for info in self.coef_classes.values()}
        missing = []
        for name, key in names.items():
            f, s, w = key
            if f > self.f_max or s > min(s_hi, self.s_max) or not self.table.in_window(f, s, w):
                continue
            has = (name in self.generators) or (name in self.coef_classes)
            if not has:
                missing.append(f"{name} at {key}")
        extras = []
        for name, info in self.generators.items():
            f, s, w = info.key
            if name.startswith("x(") and s_lo <= s <= s_hi:
                extras.append(f"{name}")
        return {"missing": missing, "extra": extras, "problems": list(self.problems)}


def rank_identity_q1(ext_fq: ExtTable, ext_c: ExtTable, s_max: int, f_max: int,
                     w_lo: int, w_hi: int) -> List[str]:
    """dim Ext(F_q) = dim Ext(C) + dim Ext(C) at the (s+1, w+1) shift."""
    bad = []
    for f in range(0, f_max + 1):
        for s in range(-2, s_max + 1):
            for w in range(w_lo, w_hi + 1):
                if not (ext_fq.in_window(f, s, w) and ext_c.in_window(f, s, w)
                        and ext_c.in_window(f, s + 1, w + 1)):
                    continue
                lhs = ext_fq.dim(f, s, w)
                rhs = ext_c.dim(f, s, w) + ext_c.dim(f, s + 1, w + 1)
                if lhs != rhs:
                    bad.append(f"(f,s,w)=({f},{s},{w}): {lhs} != {rhs}")
    return bad

def vanishing_line(ext_fq: ExtTable, s_max: int, f_max: int) -> List[str]:
    """Ext(F_q)^{f,(s,w)} = 0 whenever 0 < s < f - 1."""
    bad = []
    for (f, s, w), cell in ext_fq.cells.items():
        if f <= f_max and 0 < s < f - 1 and s <= s_max and cell.dim:
            bad.append(f"(f,s,w)=({f},{s},{w}): dim {cell.dim}")
    return bad


def write_ext_table(path: str, ring: ExtRing, s_lo: int = -2, s_hi: int = 21):
    table = ring.table
    lines = []
    for (f, s, w) in sorted(table.cells):
        cell = table.cells[(f, s, w)]
        if cell.dim and s_lo <= s <= s_hi:
            lines.append(f"ext {f} {s} {w} {cell.dim}")
    for name in sorted(ring.coef_classes) + sorted(ring.generators):
        info = ring.class_of(name)
        f, s, w = info.key
        if not (s_lo <= s <= s_hi):
            continue
        coch = ring.table.rep_to_cochain(info.key, info.vec)
        rep = " ; ".join(f"{coef_str(m)}|{j}" for j, m in sorted(coch))
        flag = "square" if info.divisible else "circle"
        lines.append(f"class {f} {s} {w} {name!r} {flag} {rep}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


Monomial = Tuple[Tuple[str, int], ...]


class MonomialBasis:
    """Spanning monomials in the named generators, bucketed per cell.

    A single enumeration pass walks exponent vectors of the positive-
    filtration generators with incremental products (pruned at zero) and
    attaches every coefficient completion that lands inside the window.
    """

    def __init__(self, ring: ExtRing, s_hi: Optional[int] = None, f_hi: Optional[int] = None):
        self.ring = ring.analyze()
        table = ring.table
        self.s_hi = table.s_max if s_hi is None else s_hi
        self.f_hi = table.max_f if f_hi is None else f_hi
        self._gen_list = sorted(ring.generators)
        self._buckets: Dict[CellKey, List[Tuple[Monomial, int]]] = {}
        self._cells: Dict[CellKey, List[Tuple[Monomial, int]]] = {}
        self._eval_cache: Dict[Monomial, Tuple[CellKey, int]] = {}
        self._populated = False

    def eval(self, mono: Monomial) -> Tuple[CellKey, int]:
        hit = self._eval_cache.get(mono)
        if hit is None:
            hit = self.ring.eval_monomial(list(mono))
            self._eval_cache[mono] = hit
        return hit

    # coefficient completions -------------------------------------------------

    def _attach(self, prefix: Monomial, key: CellKey, vec: int):
        ring = self.ring
        table = ring.table
        kind = ring.kind
        shapes: List[Tuple[Monomial, Tuple[str, int]]]
        if kind == "C":
            shapes = [((), ("tau", 1))]
        elif kind == "Fq1":
            shapes = [((), ("tau", 1)), ((("u", 1),), ("tau", 1))]
        else:
            shapes = [((), ("[tau^2]", 2)), ((("rho", 1),), ("[tau^2]", 2)),
                      ((("[rho tau]", 1),), ("[tau^2]", 2))]
        for head, (tname, tstep) in shapes:
            k2, v2 = key, vec
            ok = True
            for cname, ce in head:
                for _ in range(ce):
                    k2, v2 = ring.multiply_by(cname, k2, v2)
                    if v2 == 0:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            e = 0
            while True:
                if v2 == 0:
                    break
                if table.in_window(*k2):
                    mono = tuple(sorted(prefix + head + (((tname, e),) if e else ())))
                    self._buckets.setdefault(k2, []).append((mono, v2))
                if k2[2] - tstep < table.w_min:
                    break
                k2, v2 = ring.multiply_by(tname, k2, v2)
                e += 1

    def _populate(self):
        if self._populated:
            return
        ring = self.ring

        def rec(idx: int, prefix: List[Tuple[str, int]], gsum, kv):
            self._attach(tuple(prefix), kv[0], kv[1])
            if idx >= len(self._gen_list):
                return
            for nxt in range(idx, len(self._gen_list)):
                name = self._gen_list[nxt]
                nf, ns, nw = ring.generators[name].key
                gf, gs, gw = gsum
                k2, v2 = kv
                e = 0
                while gf + (e + 1) * nf <= self.f_hi and gs + (e + 1) * ns <= self.s_hi + 2:
                    k2, v2 = ring.multiply_by(name, k2, v2)
                    if v2 == 0:
                        break
                    e += 1
                    prefix.append((name, e))
                    rec(nxt + 1, prefix, (gf + e * nf, gs + e * ns, gw + e * nw), (k2, v2))
                    prefix.pop()

        rec(0, [], (0, 0, 0), self.ring.unit())
        self._populated = True

    def monomials(self, key: CellKey) -> List[Tuple[Monomial, int]]:
        hit = self._cells.get(key)
        if hit is not None:
            return hit
        self._populate()
        cell = self.ring.table.cell(key)
        want = cell.dim if cell else 0
        span = Subspace()
        chosen: List[Tuple[Monomial, int]] = []
        for mono, vec in sorted(self._buckets.get(key, ())):
            if span.add(vec):
                chosen.append((mono, vec))
        if span.dim != want:
            raise ExtError(
                f"monomials span {span.dim} of {want} at {key}: insufficient products"
            )
        self._cells[key] = chosen
        return chosen

    def project_formal(self, key: CellKey, formal: Iterable[Tuple[Monomial, int]]) -> Tuple[int, ...]:
        """Coordinates of a formal GF(2) sum of evaluated classes."""
        basis = self.monomials(key)
        acc = 0
        for _mono, vec in formal:
            acc ^= vec
        rows = [vec for _m, vec in basis]
        combo = solve(rows, max(v.bit_length() for v in rows + [acc, 1]), acc)
        if combo is None:
            raise ExtError(f"class outside monomial span at {key}")
        return tuple((combo >> i) & 1 for i in range(len(basis)))
