"""Goal-preserving CHC transformations and the helpers around them.

Partial evaluation (PE), constraint specialisation (CS) via a query-answer
analysis, and trace elimination (TE) by tree-automata difference, plus the
initial-clause operations used by the inference loop.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .absint import DEFAULT_WIDEN_DELAY, analyze, atom_constraints, from_positional, to_positional
from .chc import Atom, Clause, DerivationTree, Program, instantiate, sccs, tree_constraint
from .linarith import (
    TRUE_CONJ,
    Conjunction,
    DnfFormula,
    conj_entails,
    conj_entails_atom,
    integer_tighten,
    is_sat,
    project,
    simplify,
    simplify_conjunction,
)

PE, CS, TE = "PE", "CS", "TE"


@dataclass(frozen=True)
class TransformStep:
    kind: str
    goal: str
    produced: Program
    harvested: DnfFormula


# ---------------------------------------------------------------------------
# initial clauses


def _apart(c: Clause, avoid) -> Clause:
    """Rename non-head variables of ``c`` that clash with ``avoid``."""
    clash = (c.vars - set(c.head.args)) & set(avoid)
    if not clash:
        return c
    used = set(c.vars) | set(avoid)
    mapping = {}
    for v in sorted(clash):
        k = 1
        while f"{v}_{k}" in used:
            k += 1
        mapping[v] = f"{v}_{k}"
        used.add(mapping[v])
    return c.rename(mapping)


def _init_targets(p: Program) -> list[str]:
    preds = list(dict.fromkeys(c.head.pred for c in p.clauses if p.is_initial(c)))
    return preds or [p.init_pred]


def init_replace(p: Program, phi: DnfFormula) -> Program:
    """Replace all initial clauses by one clause per disjunct of ``phi``."""
    _check_scope(p, phi)
    new = [Clause(Atom(pred, p.var_decl), d) for pred in _init_targets(p) for d in phi.disjuncts]
    out, placed = [], False
    for c in p.clauses:
        if p.is_initial(c):
            if not placed:
                out.extend(new)
                placed = True
            continue
        out.append(c)
    if not placed:
        out = new + out
    return p.with_clauses(out)


def _check_scope(p: Program, phi: DnfFormula) -> None:
    extra = phi.vars - set(p.var_decl)
    if extra:
        raise ValueError(f"formula mentions {sorted(extra)} outside the init scope {p.var_decl}")


def u_approximate(p: Program, phi: DnfFormula, integer: bool = True) -> Program:
    """Restrict every initial clause by each disjunct of ``phi`` (dropping unsat products)."""
    _check_scope(p, phi)
    out = []
    for c in p.clauses:
        if not p.is_initial(c):
            out.append(c)
            continue
        c = _apart(c, p.var_decl)
        mapping = dict(zip(p.var_decl, c.head.args))
        for d in phi.disjuncts:
            conj = c.constraint & d.rename(mapping)
            if is_sat(conj, integer):
                out.append(replace(c, constraint=simplify_conjunction(conj, integer)))
    return p.with_clauses(out)


def extract_np(p: Program, integer: bool = True) -> DnfFormula:
    """Disjunction of the initial-clause constraints over the init scope."""
    ds = []
    for c in p.clauses:
        if not p.is_initial(c):
            continue
        c = _apart(c, p.var_decl)
        proj = project(c.constraint, c.head.args, integer)
        ds.append(proj.rename(dict(zip(c.head.args, p.var_decl))))
    return simplify(DnfFormula.of(ds, p.var_decl), integer, merge=True)


# ---------------------------------------------------------------------------
# partial evaluation


def _abstract(ctx: Conjunction, cands: list, integer: bool) -> Conjunction:
    return simplify_conjunction(Conjunction.of(k for k in cands if conj_entails_atom(ctx, k, integer)), integer)


def _version_names(p: Program, versions: dict[str, list]) -> dict[tuple[str, int], str]:
    taken = set(p.predicates)
    names = {}
    for pred, vs in versions.items():
        if len(vs) == 1:
            names[(pred, 0)] = pred
            continue
        k = 1
        for i in range(len(vs)):
            while f"{pred}_{k}" in taken:
                k += 1
            names[(pred, i)] = f"{pred}_{k}"
            taken.add(names[(pred, i)])
    return names


def partial_evaluate(p: Program, goal: str, integer: bool = True) -> Program:
    """Polyvariant specialisation of ``p`` for ``goal``.

    Versions are (predicate, call context) pairs found by propagating
    contexts top-down and left-to-right from the goal.  A call that stays
    inside the caller's recursive component gets its context abstracted onto
    a finite set of atoms read off the program, so the set of versions is
    finite.  Each version's clauses carry its context in their bodies.
    """
    goal_pred = p.goal(goal)
    comp = sccs(p)
    cands = atom_constraints(p, integer)
    versions: dict[str, list[Conjunction]] = defaultdict(list)
    queue: list[tuple[str, int]] = []

    def version_of(pred: str, ctx: Conjunction) -> int:
        for i, known in enumerate(versions[pred]):
            if conj_entails(known, ctx, integer) and conj_entails(ctx, known, integer):
                return i
        versions[pred].append(ctx)
        queue.append((pred, len(versions[pred]) - 1))
        return len(versions[pred]) - 1

    if not p.clauses_for(goal_pred):
        return p.with_clauses([])
    version_of(goal_pred, TRUE_CONJ)
    emitted = []
    while queue:
        pred, i = queue.pop(0)
        ctx = versions[pred][i]
        for c in p.clauses_for(pred):
            c = _apart(c, set(ctx.vars))
            body_c = from_positional(ctx, c.head.args) & c.constraint
            if not is_sat(body_c, integer):
                continue
            body_c = simplify_conjunction(body_c, integer)
            calls = []
            for a in c.body:
                call = to_positional(project(body_c, a.args, integer), a.args)
                if comp.get(a.pred) == comp.get(pred):
                    call = _abstract(call, cands.get(a.pred, []), integer)
                calls.append((a, version_of(a.pred, call)))
            emitted.append((c, (pred, i), body_c, calls))
    names = _version_names(p, versions)
    out = []
    for c, key, body_c, calls in emitted:
        out.append(Clause(Atom(names[key], c.head.args), body_c,
                          tuple(Atom(names[(a.pred, k)], a.args) for a, k in calls), c.id))
    init_preds = {names[(q, k)] for q in p.init_preds for k in range(len(versions.get(q, [])))}
    return p.with_clauses(out, init_preds=init_preds | p.init_preds)


# ---------------------------------------------------------------------------
# query-answer transformation and constraint specialisation


def answer_pred(pred: str) -> str:
    return f"{pred}__a"


def query_pred(pred: str) -> str:
    return f"{pred}__q"


def query_answer_transform(p: Program, goal: str) -> Program:
    """Answer and query clauses for a combined top-down/bottom-up analysis."""
    goal_pred = p.goal(goal)
    out = [Clause(Atom(query_pred(goal_pred), ()), TRUE_CONJ)]
    for c in p.clauses:
        hq = Atom(query_pred(c.head.pred), c.head.args)
        answers = [Atom(answer_pred(b.pred), b.args) for b in c.body]
        out.append(Clause(Atom(answer_pred(c.head.pred), c.head.args), c.constraint, (hq, *answers), c.id))
        for i, b in enumerate(c.body):
            out.append(Clause(Atom(query_pred(b.pred), b.args), c.constraint, (hq, *answers[:i]), c.id))
    return p.with_clauses(out, init_preds=set())


def constraint_specialise(p: Program, goal: str, integer: bool = True,
                          widen_delay: int = DEFAULT_WIDEN_DELAY) -> Program:
    """Conjoin each atom's answer invariant into its clauses; drop clauses that become unsat."""
    values = analyze(query_answer_transform(p, goal), widen_delay, integer)
    out = []
    for c in p.clauses:
        conj = c.constraint
        for a in (c.head, *c.body):
            v = values.get(answer_pred(a.pred))
            if v is None:
                conj = None
                break
            conj = conj & from_positional(v, a.args)
        if conj is None or not is_sat(conj, integer):
            continue
        out.append(replace(c, constraint=simplify_conjunction(conj, integer)))
    return p.with_clauses(out)


# ---------------------------------------------------------------------------
# derivation search


class _Search:
    def __init__(self, p: Program, integer: bool):
        self.p = p
        self.integer = integer
        self.by_pred: dict[str, list[Clause]] = defaultdict(list)
        for c in p.clauses:
            self.by_pred[c.head.pred].append(c)
        self.fresh = (f"_T{n}" for n in itertools.count())

    def atom(self, a: Atom, depth: int, conj: Conjunction, live: frozenset) -> Iterator:
        if depth == 0:
            return
        for c in self.by_pred.get(a.pred, ()):
            inst = instantiate(c, a.args, self.fresh)
            keep = set(live) | set(a.args)
            for b in inst.body:
                keep.update(b.args)
            cur = project(conj & inst.constraint, keep, self.integer, simplify=False)
            if not is_sat(cur, self.integer):
                continue
            for children, after in self.atoms(inst.body, depth - 1, cur, live):
                yield (DerivationTree(c.id, inst, children),
                       project(after, live, self.integer, simplify=False))

    def atoms(self, atoms: tuple[Atom, ...], depth: int, conj: Conjunction, live: frozenset) -> Iterator:
        if not atoms:
            yield (), conj
            return
        first, rest = atoms[0], atoms[1:]
        live_rest = frozenset(live | {v for b in rest for v in b.args})
        for node, c1 in self.atom(first, depth, conj, live_rest):
            for nodes, c2 in self.atoms(rest, depth, c1, live):
                yield (node, *nodes), c2


def find_feasible_derivation(p: Program, goal: str, depth_bound: int = 12,
                             integer: bool = True) -> Optional[DerivationTree]:
    """A feasible AND-tree for ``goal`` of minimal depth (at most ``depth_bound``), or ``None``."""
    if depth_bound < 1:
        raise ValueError("depth_bound must be at least 1")
    goal_pred = p.goal(goal)
    arity = next((len(c.head.args) for c in p.clauses if c.head.pred == goal_pred), 0)
    root = Atom(goal_pred, tuple(f"_G{i}" for i in range(arity)))

    def first(depth):
        s = _Search(p, integer)
        for tree, _ in s.atom(root, depth, TRUE_CONJ, frozenset()):
            return tree
        return None

    if first(depth_bound) is None:
        return None
    for d in range(1, depth_bound + 1):
        t = first(d)
        if t is not None:
            return t
    return None


def initial_nodes(p: Program, t: DerivationTree) -> list[DerivationTree]:
    return [n for n in t.nodes() if p.is_initial(p.clause(n.clause_id))]


def theta_of_tree(p: Program, t: DerivationTree, integer: bool = True) -> DnfFormula:
    """Tree constraint projected onto the arguments of each initial node, disjoined."""
    tc = tree_constraint(t)
    if not is_sat(tc, integer):
        raise ValueError("theta is only defined for feasible trees")
    ds = []
    for n in initial_nodes(p, t):
        args = n.instance.head.args
        ds.append(project(tc, args, integer).rename(dict(zip(args, p.var_decl))))
    return simplify(DnfFormula.of(ds, p.var_decl), integer, merge=True)


def skeletons(p: Program, goal: str, depth: int) -> set[tuple]:
    """All clause-id skeletons (feasible or not) rooted at ``goal`` of depth at most ``depth``."""
    memo: dict[tuple[str, int], set] = {}

    def of(pred: str, d: int) -> set:
        if d == 0:
            return set()
        key = (pred, d)
        if key not in memo:
            out = set()
            for c in p.clauses_for(pred):
                for kids in itertools.product(*[of(b.pred, d - 1) for b in c.body]):
                    out.add((c.id, kids))
            memo[key] = out
        return memo[key]

    return of(p.goal(goal), depth)


# ---------------------------------------------------------------------------
# trace elimination


@dataclass(frozen=True)
class Fta:
    """Bottom-up tree automaton: transitions are ``(symbol, child_states, target)``."""

    states: frozenset
    transitions: frozenset
    finals: frozenset

    def accepts(self, tree: tuple) -> bool:
        return bool(self.run(tree) & self.finals)

    def run(self, tree: tuple) -> set:
        sym, kids = tree
        kid_states = [self.run(k) for k in kids]
        out = set()
        for s, args, tgt in self.transitions:
            if s == sym and len(args) == len(kids) and all(a in ks for a, ks in zip(args, kid_states)):
                out.add(tgt)
        return out


def program_fta(p: Program, goal: str) -> Fta:
    trans = frozenset((c.id, tuple(b.pred for b in c.body), c.head.pred) for c in p.clauses)
    return Fta(frozenset(p.predicates), trans, frozenset({p.goal(goal)}))


def trace_fta(t: DerivationTree) -> Fta:
    """Deterministic automaton accepting exactly the skeleton of ``t``."""
    trans = set()
    for n in t.nodes():
        sk = n.skeleton()
        trans.add((n.clause_id, tuple(c.skeleton() for c in n.children), sk))
    return Fta(frozenset(s for _, _, s in trans), frozenset(trans), frozenset({t.skeleton()}))


SINK = ("<other>", ())


def eliminate_trace(p: Program, t: DerivationTree, goal: str) -> Program:
    """Remove exactly the skeleton of ``t`` from the goal derivations of ``p``.

    The program automaton is intersected with the complement of the
    (completed, deterministic) single-tree automaton; product states become
    predicate versions and each product transition a copy of its clause.
    """
    t.check(p)
    goal_pred = p.goal(goal)
    if t.instance.head.pred != goal_pred:
        raise ValueError(f"tree is not rooted at {goal_pred}")
    if any(b.pred == goal_pred for c in p.clauses for b in c.body):
        raise ValueError(f"goal predicate {goal_pred} must not occur in clause bodies")
    tfa = trace_fta(t)
    delta = {(sym, args): tgt for sym, args, tgt in tfa.transitions}
    root = t.skeleton()
    order = {s: i for i, s in enumerate(sorted(tfa.states, key=repr))}
    order[SINK] = -1

    def step(cid, kid_states):
        if SINK in kid_states:
            return SINK
        return delta.get((cid, tuple(kid_states)), SINK)

    reach: dict[str, set] = defaultdict(set)
    trans: set = set()
    changed = True
    while changed:
        changed = False
        for c in p.clauses:
            pools = [sorted(reach[b.pred], key=order.get) for b in c.body]
            for combo in itertools.product(*pools):
                tgt = step(c.id, combo)
                key = (c.id, combo, tgt)
                if key in trans:
                    continue
                trans.add(key)
                if tgt not in reach[c.head.pred]:
                    reach[c.head.pred].add(tgt)
                    changed = True
    finals = {(goal_pred, s) for s in reach[goal_pred] if s != root}
    # keep states that can contribute to an accepted tree
    useful = set(finals)
    grow = True
    while grow:
        grow = False
        for cid, combo, tgt in trans:
            head = p.clause(cid).head.pred
            if (head, tgt) in useful:
                for b, s in zip(p.clause(cid).body, combo):
                    if (b.pred, s) not in useful:
                        useful.add((b.pred, s))
                        grow = True
    names: dict[tuple, str] = {st: goal_pred for st in finals}
    taken = set(p.predicates)
    for pred in p.predicates:
        if pred == goal_pred:
            continue
        states = sorted((s for q, s in useful if q == pred), key=order.get)
        k = 1
        for s in states:
            if s == SINK:
                names[(pred, s)] = pred
                continue
            while f"{pred}_{k}" in taken:
                k += 1
            names[(pred, s)] = f"{pred}_{k}"
            taken.add(names[(pred, s)])
    out = []
    for c in p.clauses:
        mine = sorted((combo, tgt) for cid, combo, tgt in trans if cid == c.id)
        mine = sorted(mine, key=lambda x: ([order[s] for s in x[0]], order[x[1]]))
        for combo, tgt in mine:
            if (c.head.pred, tgt) not in useful:
                continue
            if c.head.pred == goal_pred and (goal_pred, tgt) not in finals:
                continue
            out.append(replace(c, head=Atom(names[(c.head.pred, tgt)], c.head.args),
                               body=tuple(Atom(names[(b.pred, s)], b.args) for b, s in zip(c.body, combo))))
    init_preds = {names[st] for st in useful if st[0] in p.init_preds and st in names}
    return p.with_clauses(out, init_preds=init_preds | p.init_preds)


def origin_skeleton(p: Program, sk: tuple) -> tuple:
    """Map a skeleton over ``p``'s clause ids back to the ids its clauses came from."""
    cid, kids = sk
    c = p.clause(cid)
    return (c.origin[0] if c.origin else cid, tuple(origin_skeleton(p, k) for k in kids))
