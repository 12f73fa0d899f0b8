"""Convex-polyhedra abstract interpretation of CHC programs.

A polyhedron for predicate ``p`` of arity n is a :class:`Conjunction` over the
positional variables ``$1 .. $n``; ``None`` stands for bottom.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from typing import Optional

from .chc import Clause, Program
from .linarith import (
    EQ,
    LE,
    LT,
    Conjunction,
    conj_entails,
    conj_entails_atom,
    hull_conjunctions,
    integer_tighten,
    is_sat,
    make_row,
    project,
    simplify_conjunction,
)

Polyhedron = Optional[Conjunction]
PredicateValuation = dict[str, Conjunction]

DEFAULT_WIDEN_DELAY = 3


def positional(n: int) -> tuple[str, ...]:
    return tuple(f"${i + 1}" for i in range(n))


def to_positional(c: Conjunction, args) -> Conjunction:
    return c.rename(dict(zip(args, positional(len(args)))))


def from_positional(c: Conjunction, args) -> Conjunction:
    return c.rename(dict(zip(positional(len(args)), args)))


def _close(c: Conjunction, integer: bool) -> Conjunction:
    """Domain entry: tighten over integers, otherwise weaken strict atoms."""
    if integer:
        return integer_tighten(c)
    return Conjunction.of(make_row(a.as_dict(), a.const, LE) if a.rel == LT else a for a in c.constraints)


def hull(a: Polyhedron, b: Polyhedron, integer: bool = False) -> Polyhedron:
    if a is None:
        return b
    if b is None:
        return a
    return hull_conjunctions(a, b, integer)


def _inequalities(c: Conjunction) -> list:
    out = []
    for a in c.constraints:
        if a.rel == EQ:
            out.append(make_row(a.as_dict(), a.const, LE))
            out.append(make_row({v: -k for v, k in a.coeffs}, -a.const, LE))
        else:
            out.append(a)
    return [r for r in out if r is not True]


def widen(a: Polyhedron, b: Polyhedron, integer: bool = False, limits=()) -> Polyhedron:
    """Standard widening: keep the inequalities of ``a`` that ``b`` entails.

    Any of ``limits`` entailed by ``b`` is kept as well (widening up to).
    """
    if a is None:
        return b
    if b is None:
        return a
    kept = [r for r in _inequalities(a) if conj_entails_atom(b, r, integer)]
    kept += [r for r in limits if conj_entails_atom(b, r, integer)]
    return simplify_conjunction(Conjunction.of(kept), integer)


def leq(a: Polyhedron, b: Polyhedron, integer: bool = False) -> bool:
    if a is None:
        return True
    if b is None:
        return not is_sat(a, integer)
    return conj_entails(a, b, integer)


def atom_constraints(p: Program, integer: bool = False) -> dict[str, list]:
    """Per predicate, the clause atoms (and their projections) over each occurrence's arguments.

    Atoms are renamed to positional variables; over integers they are tightened.
    """
    out: dict[str, dict] = defaultdict(dict)
    for c in p.clauses:
        for a in (c.head, *c.body):
            if not a.args:
                continue
            args = set(a.args)
            local = Conjunction.of(k for k in c.constraint.constraints if k.vars <= args)
            for src in (local, project(c.constraint, a.args, integer)):
                for k in to_positional(integer_tighten(src) if integer else src, a.args).constraints:
                    if not k.is_false():
                        out[a.pred][k] = None
    return {q: sorted(v) for q, v in out.items()}


def thresholds(p: Program, integer: bool = False) -> dict[str, list]:
    """Widening thresholds: clause atoms per predicate and their negations, as inequalities."""
    out = {}
    for q, atoms in atom_constraints(p, integer).items():
        rows = set()
        for a in atoms:
            for r in [a, *a.negated()]:
                for k in _inequalities(_close(Conjunction.of([r]), integer)):
                    rows.add(k)
        out[q] = sorted(rows)
    return out


def clause_post(c: Clause, values: PredicateValuation, integer: bool = False) -> Polyhedron:
    """Abstract consequence of one clause: its head constraint, or ``None``."""
    conj = c.constraint
    for a in c.body:
        v = values.get(a.pred)
        if v is None:
            return None
        conj = conj & from_positional(v, a.args)
    # decide emptiness before closing: closing strict atoms one by one can make an empty set non-empty
    if not is_sat(conj, integer):
        return None
    conj = _close(conj, integer)
    res = project(conj, c.head.args, integer)
    if res.is_trivially_false():
        return None
    return to_positional(_close(res, integer), c.head.args)


def analyze(p: Program, widen_delay: int = DEFAULT_WIDEN_DELAY, integer: bool = False) -> PredicateValuation:
    """Post-fixpoint of the program's clauses in the closed-polyhedra domain.

    Clauses are visited round-robin in program order; each predicate is
    joined by convex hull for its first ``widen_delay`` growth steps and
    widened afterwards, up to thresholds read off the clause constraints.
    """
    limits = thresholds(p, integer)
    values: PredicateValuation = {}
    growth: Counter = Counter()
    changed = True
    while changed:
        changed = False
        for c in p.clauses:
            post = clause_post(c, values, integer)
            if post is None:
                continue
            h = c.head.pred
            old = values.get(h)
            if old is not None and leq(post, old, integer):
                continue
            if old is None:
                new = simplify_conjunction(post, integer)
            else:
                growth[h] += 1
                joined = hull(old, post, integer)
                if growth[h] > widen_delay:
                    new = widen(old, joined, integer, limits.get(h, ()))
                    if leq(new, old, integer):
                        # incomplete integer entailment can stall the widening; force progress
                        new = widen(old, post, integer, limits.get(h, ()))
                        if leq(new, old, integer):
                            new = Conjunction()
                else:
                    new = joined
            values[h] = new
            changed = True
    return values


def is_model(p: Program, values: PredicateValuation, integer: bool = False) -> bool:
    """Does every clause's abstract consequence fall inside its head's value?"""
    return all(leq(clause_post(c, values, integer), values.get(c.head.pred), integer) for c in p.clauses)
