"""Exact linear arithmetic over the rationals.

Constraints are kept in a canonical integer form ``sum(c_i * x_i) + k REL 0``
with ``REL`` one of ``<=``, ``<`` or ``=``.  Satisfiability and projection use
Fourier-Motzkin elimination.  Passing ``integer=True`` to the solving
operations turns on integer tightening of every derived row, which is sound
for integer-valued variables (an "unsat" answer is then an integer-unsat
answer) but not complete.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

LE, LT, EQ = "<=", "<", "="

DEFAULT_DNF_CAP = 4096


class DnfSizeError(RuntimeError):
    """Raised when a DNF operation would exceed the configured disjunct cap."""


class LinTerm:
    """A linear term ``sum(coeffs[v] * v) + constant`` with rational coefficients."""

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Mapping[str, Fraction | int] | None = None, constant=0):
        self.coeffs = {v: Fraction(c) for v, c in (coeffs or {}).items() if c != 0}
        self.constant = Fraction(constant)

    @classmethod
    def var(cls, name: str) -> LinTerm:
        return cls({name: 1})

    @classmethod
    def const(cls, value) -> LinTerm:
        return cls(None, value)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: LinTerm) -> LinTerm:
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs.get(v, 0) + c
        return LinTerm(coeffs, self.constant + other.constant)

    def __neg__(self) -> LinTerm:
        return self.scale(-1)

    def __sub__(self, other: LinTerm) -> LinTerm:
        return self + (-other)

    def scale(self, k) -> LinTerm:
        return LinTerm({v: c * k for v, c in self.coeffs.items()}, self.constant * k)

    def __eq__(self, other):
        return isinstance(other, LinTerm) and self.coeffs == other.coeffs and self.constant == other.constant

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.constant))

    def __repr__(self):
        return f"LinTerm({self.coeffs!r}, {self.constant!r})"


@dataclass(frozen=True, order=True)
class Constraint:
    """Canonical atom ``sum(coeffs) + const REL 0`` with integer data.

    ``coeffs`` is sorted by variable name and has no zero entries.  Build
    instances with :func:`constraint` or :func:`make_row`, never directly.
    """

    coeffs: tuple[tuple[str, int], ...]
    const: int
    rel: str

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    def coeff(self, var: str) -> int:
        for v, c in self.coeffs:
            if v == var:
                return c
        return 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def is_false(self) -> bool:
        return not self.coeffs

    def negated(self) -> list[Constraint]:
        """Atoms whose disjunction is equivalent to the negation of this atom."""
        d = {v: -c for v, c in self.coeffs}
        if self.rel == LE:
            return _only(make_row(d, -self.const, LT))
        if self.rel == LT:
            return _only(make_row(d, -self.const, LE))
        return _only(make_row(self.as_dict(), self.const, LT)) + _only(make_row(d, -self.const, LT))

    def tighten(self) -> Constraint | bool:
        """Strongest integer-equivalent form of this atom."""
        if not self.coeffs:
            return self
        g = 0
        for _, c in self.coeffs:
            g = math.gcd(g, abs(c))
        k = self.const
        if self.rel == EQ:
            if k % g:
                return False
            return make_row({v: c // g for v, c in self.coeffs}, k // g, EQ)
        if self.rel == LT:
            k += 1
        return make_row({v: c // g for v, c in self.coeffs}, -((-k) // g), LE)

    def rename(self, mapping: Mapping[str, str]) -> Constraint | bool:
        d: dict[str, int] = {}
        for v, c in self.coeffs:
            w = mapping.get(v, v)
            d[w] = d.get(w, 0) + c
        return make_row(d, self.const, self.rel)

    def evaluate(self, point: Mapping[str, Fraction | int]) -> bool:
        s = sum(Fraction(c) * point[v] for v, c in self.coeffs) + self.const
        if self.rel == LE:
            return s <= 0
        if self.rel == LT:
            return s < 0
        return s == 0

    def __str__(self) -> str:
        if not self.coeffs:
            return "false"
        coeffs = dict(self.coeffs)
        const = self.const
        op = {LE: "=<", LT: "<", EQ: "="}[self.rel]
        if self.rel != EQ and self.coeffs[0][1] < 0:
            coeffs = {v: -c for v, c in coeffs.items()}
            const = -const
            op = {LE: ">=", LT: ">"}[self.rel]
        left = [(v, c) for v, c in coeffs.items() if c > 0]
        right = [(v, -c) for v, c in coeffs.items() if c < 0]
        lhs = _format_sum(left, 0)
        rhs = _format_sum(right, -const)
        return f"{lhs}{op}{rhs}"

    def __repr__(self) -> str:
        return f"Constraint({self})"


FALSE_ATOM = Constraint((), 1, LE)


def _format_sum(terms: list[tuple[str, int]], const: int) -> str:
    out = ""
    for v, c in terms:
        piece = v if c == 1 else f"{c}*{v}"
        out = piece if not out else f"{out}+{piece}"
    if not out:
        return str(const)
    if const > 0:
        out += f"+{const}"
    elif const < 0:
        out += f"-{-const}"
    return out


def _only(c: Constraint | bool) -> list[Constraint]:
    if c is True:
        return []
    if c is False:
        return [FALSE_ATOM]
    return [c]


def make_row(coeffs: Mapping[str, int | Fraction], const, rel: str) -> Constraint | bool:
    """Normalize ``coeffs . x + const REL 0``; returns a bool when no variable remains."""
    items = [(v, Fraction(c)) for v, c in coeffs.items() if c != 0]
    const = Fraction(const)
    if not items:
        if rel == LE:
            return const <= 0
        if rel == LT:
            return const < 0
        return const == 0
    den = const.denominator
    for _, c in items:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = sorted((v, int(c * den)) for v, c in items)
    k = int(const * den)
    g = abs(k)
    for _, c in ints:
        g = math.gcd(g, abs(c))
    if rel == EQ and ints[0][1] < 0:
        g = -g
    return Constraint(tuple((v, c // g) for v, c in ints), k // g, rel)


def constraint(lhs: LinTerm, op: str, rhs: LinTerm) -> list[Constraint]:
    """Atoms equivalent to ``lhs op rhs``; ``[]`` is true and ``[FALSE_ATOM]`` false."""
    if op in ("<=", "=<"):
        t, rel = lhs - rhs, LE
    elif op == "<":
        t, rel = lhs - rhs, LT
    elif op == ">=":
        t, rel = rhs - lhs, LE
    elif op == ">":
        t, rel = rhs - lhs, LT
    elif op in ("=", "=="):
        t, rel = lhs - rhs, EQ
    else:
        raise ValueError(f"unknown relation {op!r}")
    return _only(make_row(t.coeffs, t.constant, rel))


# ---------------------------------------------------------------------------
# Conjunctions


@dataclass(frozen=True)
class Conjunction:
    """A finite set of atoms; the empty set is ``true``."""

    constraints: tuple[Constraint, ...] = ()

    @classmethod
    def of(cls, atoms: Iterable[Constraint | bool]) -> Conjunction:
        out = set()
        for a in atoms:
            if a is True:
                continue
            if a is False or (isinstance(a, Constraint) and a.is_false()):
                return FALSE_CONJ
            out.add(a)
        return cls(tuple(sorted(out)))

    @property
    def vars(self) -> frozenset[str]:
        vs: set[str] = set()
        for c in self.constraints:
            vs.update(v for v, _ in c.coeffs)
        return frozenset(vs)

    def is_trivially_false(self) -> bool:
        return any(c.is_false() for c in self.constraints)

    def __and__(self, other: Conjunction) -> Conjunction:
        return Conjunction.of(self.constraints + other.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)

    def rename(self, mapping: Mapping[str, str]) -> Conjunction:
        return Conjunction.of(c.rename(mapping) for c in self.constraints)

    def evaluate(self, point) -> bool:
        return all(c.evaluate(point) for c in self.constraints)

    def __str__(self) -> str:
        if not self.constraints:
            return "true"
        if self.is_trivially_false():
            return "false"
        return ", ".join(str(c) for c in self.constraints)


TRUE_CONJ = Conjunction(())
FALSE_CONJ = Conjunction((FALSE_ATOM,))


def integer_tighten(c: Conjunction) -> Conjunction:
    """Replace each atom with its strongest integer-equivalent form."""
    return Conjunction.of(a.tighten() for a in c.constraints)


# ---------------------------------------------------------------------------
# Fourier-Motzkin


def _prep(rows: Iterable[Constraint], integer: bool) -> list[Constraint] | None:
    out: dict[Constraint, None] = {}
    for r in rows:
        if integer:
            r = r.tighten()
        if r is True:
            continue
        if r is False or r.is_false():
            return None
        out[r] = None
    return _strongest(out)


def _strongest(rows: Iterable[Constraint]) -> list[Constraint]:
    """Drop inequalities dominated by another with the same coefficient vector."""
    best: dict[tuple, Constraint] = {}
    eqs: dict[Constraint, None] = {}
    for r in rows:
        if r.rel == EQ:
            eqs[r] = None
            continue
        cur = best.get(r.coeffs)
        if cur is None or (r.const, r.rel == LT) > (cur.const, cur.rel == LT):
            best[r.coeffs] = r
    return list(eqs) + list(best.values())


def _combine(p: Constraint, a: int, q: Constraint, b: int, rel: str) -> Constraint | bool:
    d: dict[str, int] = {}
    for v, c in p.coeffs:
        d[v] = d.get(v, 0) + a * c
    for v, c in q.coeffs:
        d[v] = d.get(v, 0) + b * c
    return make_row(d, a * p.const + b * q.const, rel)


def _eliminate(rows: Iterable[Constraint], elim: set[str], integer: bool) -> list[Constraint] | None:
    """Eliminate ``elim`` from ``rows``; ``None`` when the rows are unsatisfiable."""
    cur = _prep(rows, integer)
    if cur is None:
        return None
    while True:
        present = set()
        for r in cur:
            present.update(v for v, _ in r.coeffs if v in elim)
        if not present:
            return cur
        # equalities first: substitute the variable with the smallest coefficient
        best = None
        for i, r in enumerate(cur):
            if r.rel != EQ:
                continue
            for v, c in r.coeffs:
                if v in present:
                    key = (abs(c), v, i)
                    if best is None or key < best[0]:
                        best = (key, r, v)
        new: list[Constraint | bool] = []
        if best is not None:
            _, eq, x = best
            a = eq.coeff(x)
            for r in cur:
                if r is eq:
                    continue
                b = r.coeff(x)
                if b == 0:
                    new.append(r)
                else:
                    sign = 1 if a > 0 else -1
                    new.append(_combine(r, abs(a), eq, -sign * b, r.rel))
        else:
            def cost(v):
                pos = sum(1 for r in cur if r.coeff(v) > 0)
                neg = sum(1 for r in cur if r.coeff(v) < 0)
                return (pos * neg - pos - neg, v)

            x = min(present, key=cost)
            pos = [r for r in cur if r.coeff(x) > 0]
            neg = [r for r in cur if r.coeff(x) < 0]
            new = [r for r in cur if r.coeff(x) == 0]
            for p in pos:
                a = p.coeff(x)
                for q in neg:
                    b = -q.coeff(x)
                    rel = LT if LT in (p.rel, q.rel) else LE
                    new.append(_combine(p, b, q, a, rel))
        if any(r is False for r in new):
            return None
        cur = _prep([r for r in new if r is not True], integer)
        if cur is None:
            return None


def is_sat(c: Conjunction | Iterable[Constraint], integer: bool = False) -> bool:
    """Decide satisfiability (over the rationals, or soundly-for-unsat over integers)."""
    rows = list(c)
    vs = set()
    for r in rows:
        vs.update(v for v, _ in r.coeffs)
    return _eliminate(rows, vs, integer) is not None


def project(c: Conjunction, keep: Iterable[str], integer: bool = False, simplify: bool = True) -> Conjunction:
    """Existentially quantify every variable of ``c`` outside ``keep``."""
    keep = set(keep)
    rows = _eliminate(c.constraints, set(c.vars) - keep, integer)
    if rows is None:
        return FALSE_CONJ
    out = Conjunction.of(rows)
    return simplify_conjunction(out, integer) if simplify else out


def _sat_rows(rows: list[Constraint], integer: bool) -> bool:
    return is_sat(rows, integer)


def conj_entails_atom(c: Conjunction | list[Constraint], atom: Constraint, integer: bool = False) -> bool:
    rows = list(c)
    return all(not _sat_rows(rows + [n], integer) for n in atom.negated())


def conj_entails(a: Conjunction, b: Conjunction, integer: bool = False) -> bool:
    if not is_sat(a, integer):
        return True
    return all(conj_entails_atom(a, atom, integer) for atom in b.constraints)


def simplify_conjunction(c: Conjunction, integer: bool = False) -> Conjunction:
    """Equivalent conjunction with redundant atoms removed; ``FALSE_CONJ`` if unsat.

    With ``integer`` the atoms are tightened first, but redundancy is always
    judged over the rationals so the rational shape of the set is kept.
    """
    rows = _prep(c.constraints, integer)
    if rows is None or not _sat_rows(rows, integer):
        return FALSE_CONJ
    rows = sorted(set(rows))
    # merge opposite inequality pairs into equalities
    by_coeffs = {(r.coeffs, r.const): r for r in rows if r.rel == LE}
    merged = []
    used = set()
    for r in rows:
        if r in used:
            continue
        if r.rel == LE:
            opp = by_coeffs.get((tuple((v, -k) for v, k in r.coeffs), -r.const))
            if opp is not None and opp not in used:
                used.update((r, opp))
                merged.append(make_row(r.as_dict(), r.const, EQ))
                continue
        merged.append(r)
    rows = sorted(set(m for m in merged if m is not True))
    kept = list(rows)
    for r in rows:
        rest = [k for k in kept if k != r]
        if conj_entails_atom(rest, r):
            kept = rest
    return Conjunction.of(kept)


# ---------------------------------------------------------------------------
# DNF formulas


@dataclass(frozen=True)
class DnfFormula:
    """A disjunction of conjunctions; no disjuncts means ``false``."""

    disjuncts: tuple[Conjunction, ...] = ()
    scope: tuple[str, ...] = ()

    @classmethod
    def of(cls, disjuncts: Iterable[Conjunction], scope: Iterable[str] = ()) -> DnfFormula:
        ds = {d: None for d in disjuncts if not d.is_trivially_false()}
        return cls(tuple(sorted(ds, key=_conj_key)), tuple(scope))

    @classmethod
    def true(cls, scope: Iterable[str] = ()) -> DnfFormula:
        return cls((TRUE_CONJ,), tuple(scope))

    @classmethod
    def false(cls, scope: Iterable[str] = ()) -> DnfFormula:
        return cls((), tuple(scope))

    @classmethod
    def from_conj(cls, c: Conjunction, scope: Iterable[str] = ()) -> DnfFormula:
        return cls.of([c], scope)

    @property
    def vars(self) -> frozenset[str]:
        vs: set[str] = set()
        for d in self.disjuncts:
            vs |= d.vars
        return frozenset(vs)

    def rename(self, mapping: Mapping[str, str]) -> DnfFormula:
        return DnfFormula.of((d.rename(mapping) for d in self.disjuncts),
                             tuple(mapping.get(v, v) for v in self.scope))

    def evaluate(self, point) -> bool:
        return any(d.evaluate(point) for d in self.disjuncts)

    def __or__(self, other: DnfFormula) -> DnfFormula:
        return disjoin(self, other)

    def __str__(self) -> str:
        if not self.disjuncts:
            return "false"
        if len(self.disjuncts) == 1:
            return str(self.disjuncts[0])
        return " ; ".join(f"({d})" for d in self.disjuncts)


def _conj_key(c: Conjunction):
    return (len(c.constraints), c.constraints)


def _merge_scope(*fs: DnfFormula) -> tuple[str, ...]:
    out: dict[str, None] = {}
    for f in fs:
        out.update(dict.fromkeys(f.scope))
    return tuple(out)


def disjoin(f: DnfFormula, g: DnfFormula) -> DnfFormula:
    return DnfFormula.of(f.disjuncts + g.disjuncts, _merge_scope(f, g))


def conjoin(f: DnfFormula, g: DnfFormula, integer: bool = False, cap: int = DEFAULT_DNF_CAP) -> DnfFormula:
    """Cross product of disjuncts with unsatisfiable products removed."""
    out = []
    for a in f.disjuncts:
        for b in g.disjuncts:
            ab = a & b
            if is_sat(ab, integer):
                out.append(simplify_conjunction(ab, integer))
                if len(out) > cap:
                    raise DnfSizeError(f"conjunction exceeds {cap} disjuncts")
    return simplify(DnfFormula.of(out, _merge_scope(f, g)), integer)


def negate(f: DnfFormula, integer: bool = False, cap: int = DEFAULT_DNF_CAP) -> DnfFormula:
    """DNF of the negation of ``f`` (De Morgan, then distribution)."""
    acc = [TRUE_CONJ]
    for d in f.disjuncts:
        atoms = []
        for a in d.constraints:
            atoms.extend(a.negated())
        nxt = []
        for r in acc:
            for n in atoms:
                rn = r & Conjunction.of([n])
                if is_sat(rn, integer):
                    nxt.append(rn)
                    if len(nxt) > cap:
                        raise DnfSizeError(f"negation exceeds {cap} disjuncts")
        acc = simplify(DnfFormula.of(nxt), integer).disjuncts
        if not acc:
            break
    return DnfFormula.of((simplify_conjunction(a, integer) for a in acc), f.scope)


def _sat_against_negation(d: Conjunction, g: DnfFormula, integer: bool) -> bool:
    """Is ``d /\\ not g`` satisfiable?  Depth-first over the negated disjuncts."""
    def search(rows: list[Constraint], i: int) -> bool:
        if not is_sat(rows, integer):
            return False
        if i == len(g.disjuncts):
            return True
        for a in g.disjuncts[i].constraints:
            for n in a.negated():
                if search(rows + [n], i + 1):
                    return True
        return False

    return search(list(d.constraints), 0)


def entails(f: DnfFormula, g: DnfFormula, integer: bool = False) -> bool:
    """Validity of ``f -> g``."""
    return not any(_sat_against_negation(d, g, integer) for d in f.disjuncts)


def equivalent(f: DnfFormula, g: DnfFormula, integer: bool = False) -> bool:
    return entails(f, g, integer) and entails(g, f, integer)


def is_false(f: DnfFormula, integer: bool = False) -> bool:
    return not any(is_sat(d, integer) for d in f.disjuncts)


def is_valid(f: DnfFormula, integer: bool = False) -> bool:
    return entails(DnfFormula.true(), f, integer)


def simplify(f: DnfFormula, integer: bool = False, merge: bool = False) -> DnfFormula:
    """Equivalent DNF without unsat or subsumed disjuncts.

    With ``merge`` set, pairs of disjuncts whose convex hull adds no new
    points (under the chosen theory) are replaced by that hull.
    """
    ds = [simplify_conjunction(d, integer) for d in f.disjuncts]
    ds = sorted({d: None for d in ds if not d.is_trivially_false()}, key=_conj_key)
    ds = _drop_subsumed(ds, integer)
    if merge:
        changed = True
        while changed and len(ds) > 1:
            changed = False
            for i in range(len(ds)):
                for j in range(i + 1, len(ds)):
                    h = _exact_union(ds[i], ds[j], integer)
                    if h is not None:
                        ds = [d for k, d in enumerate(ds) if k not in (i, j)] + [h]
                        ds = _drop_subsumed(sorted(set(ds), key=_conj_key), integer)
                        changed = True
                        break
                if changed:
                    break
    return DnfFormula.of(ds, f.scope)


def _drop_subsumed(ds: list[Conjunction], integer: bool) -> list[Conjunction]:
    kept: list[Conjunction] = []
    for i, d in enumerate(ds):
        subsumed = False
        for j, e in enumerate(ds):
            if i == j or not conj_entails(d, e, integer):
                continue
            # on mutual entailment keep the first one
            if j < i or not conj_entails(e, d, integer):
                subsumed = True
                break
        if not subsumed:
            kept.append(d)
    return kept


def _exact_union(a: Conjunction, b: Conjunction, integer: bool) -> Conjunction | None:
    if not integer and any(c.rel == LT for c in a.constraints + b.constraints):
        return None
    h = hull_conjunctions(a, b, integer)
    if entails(DnfFormula.from_conj(h), DnfFormula.of([a, b]), integer):
        return h
    return None


def hull_conjunctions(a: Conjunction, b: Conjunction, integer: bool = False) -> Conjunction:
    """Closed convex hull of two conjunctions via the lifted-variables encoding.

    Strict atoms are treated as non-strict.
    """
    xs = sorted(a.vars | b.vars)
    lam1, lam2 = "$l1", "$l2"
    rows: list[Constraint | bool] = []
    for conj, tag, lam in ((a, "$y1_", lam1), (b, "$y2_", lam2)):
        for c in conj.constraints:
            d = {tag + v: k for v, k in c.coeffs}
            d[lam] = d.get(lam, 0) + c.const
            rows.append(make_row(d, 0, EQ if c.rel == EQ else LE))
    for x in xs:
        rows.append(make_row({x: 1, "$y1_" + x: -1, "$y2_" + x: -1}, 0, EQ))
    rows.append(make_row({lam1: 1, lam2: 1}, -1, EQ))
    rows.append(make_row({lam1: -1}, 0, LE))
    rows.append(make_row({lam2: -1}, 0, LE))
    lifted = Conjunction.of(rows)
    # the multipliers are rational, so tightening is only valid on the result
    h = project(lifted, xs, integer=False)
    return simplify_conjunction(h, integer) if integer else h
