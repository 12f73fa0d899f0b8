"""Constrained Horn clauses: syntax, parsing, printing and derivation trees."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .linarith import (
    EQ,
    TRUE_CONJ,
    Conjunction,
    LinTerm,
    is_sat,
    make_row,
)
from .syntax import ParseError, TokenStream, parse_comparison, parse_expr, tokenize

DEFAULT_INIT, DEFAULT_SAFE, DEFAULT_UNSAFE = "init", "safe", "unsafe"


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[str, ...] = ()

    def rename(self, mapping) -> Atom:
        return Atom(self.pred, tuple(mapping.get(a, a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(self.args)})"


@dataclass(frozen=True)
class Clause:
    head: Atom
    constraint: Conjunction = TRUE_CONJ
    body: tuple[Atom, ...] = ()
    id: str = ""
    # ids of the clauses this one was derived from, in the input of the last transformation
    origin: tuple[str, ...] = field(default=(), compare=False)

    @property
    def is_fact(self) -> bool:
        return not self.body

    @property
    def vars(self) -> frozenset[str]:
        vs = set(self.head.args) | set(self.constraint.vars)
        for a in self.body:
            vs.update(a.args)
        return frozenset(vs)

    def rename(self, mapping) -> Clause:
        return replace(self, head=self.head.rename(mapping), constraint=self.constraint.rename(mapping),
                       body=tuple(a.rename(mapping) for a in self.body))

    def __str__(self) -> str:
        parts = [str(c) for c in self.constraint.constraints] + [str(a) for a in self.body]
        if not parts:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(parts)}."


@dataclass(frozen=True)
class Program:
    clauses: tuple[Clause, ...] = ()
    init_pred: str = DEFAULT_INIT
    safe_pred: str = DEFAULT_SAFE
    unsafe_pred: str = DEFAULT_UNSAFE
    # predicates whose constrained facts count as initial clauses (init_pred plus its versions)
    init_preds: frozenset[str] = frozenset()
    var_decl: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.init_pred not in self.init_preds:
            object.__setattr__(self, "init_preds", frozenset(self.init_preds | {self.init_pred}))
        if self.var_decl is None:
            object.__setattr__(self, "var_decl", self._default_var_decl())

    def _default_var_decl(self) -> tuple[str, ...]:
        for c in self.clauses:
            if c.is_fact and c.head.pred in self.init_preds:
                return c.head.args
        for c in self.clauses:
            for a in (c.head, *c.body):
                if a.pred in self.init_preds:
                    return tuple(f"X{i + 1}" for i in range(len(a.args)))
        return ()

    def goal(self, which: str) -> str:
        return {"safe": self.safe_pred, "unsafe": self.unsafe_pred}.get(which, which)

    @property
    def predicates(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.clauses:
            seen[c.head.pred] = None
            for a in c.body:
                seen[a.pred] = None
        return list(seen)

    def clauses_for(self, pred: str) -> list[Clause]:
        return [c for c in self.clauses if c.head.pred == pred]

    def clause(self, cid: str) -> Clause:
        for c in self.clauses:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def is_initial(self, c: Clause) -> bool:
        return c.is_fact and c.head.pred in self.init_preds

    def with_clauses(self, clauses: Iterable[Clause], init_preds: Iterable[str] | None = None,
                     renumber: bool = True) -> Program:
        """Same distinguished names and init scope, new clause list (ids c1..cn)."""
        clauses = list(clauses)
        if renumber:
            clauses = [replace(c, id=f"c{i + 1}", origin=(c.id,) if c.id else c.origin)
                       for i, c in enumerate(clauses)]
        ip = frozenset(self.init_preds if init_preds is None else init_preds)
        return Program(tuple(clauses), self.init_pred, self.safe_pred, self.unsafe_pred, ip, self.var_decl)

    def __str__(self) -> str:
        return print_program(self)


# ---------------------------------------------------------------------------
# parsing


def _fresh_names(used: set[str]) -> Iterator[str]:
    for n in itertools.count(0):
        for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
            name = ch if n == 0 else f"{ch}{n}"
            if name not in used:
                used.add(name)
                yield name


def _normalize_atom(pred: str, args: Sequence[LinTerm], used: set[str], fresh: Iterator[str],
                    eqs: list) -> Atom:
    out: list[str] = []
    for t in args:
        if len(t.coeffs) == 1 and t.constant == 0:
            (v, c), = t.coeffs.items()
            if c == 1 and v not in out:
                out.append(v)
                continue
        v = next(fresh)
        out.append(v)
        eqs.append(make_row((LinTerm.var(v) - t).coeffs, -t.constant, EQ))
    return Atom(pred, tuple(out))


def _build_clause(head: tuple[str, list[LinTerm]], atoms: list, body: list[tuple[str, list[LinTerm]]],
                  cid: str) -> Clause:
    used: set[str] = set()
    for _, args in [head, *body]:
        for t in args:
            used.update(t.coeffs)
    for a in atoms:
        if not isinstance(a, bool):
            used.update(a.vars)
    fresh = _fresh_names(used)
    eqs: list = []
    h = _normalize_atom(head[0], head[1], used, fresh, eqs)
    b = tuple(_normalize_atom(p, args, used, fresh, eqs) for p, args in body)
    return Clause(h, Conjunction.of(list(atoms) + eqs), b, cid)


def parse(text: str) -> Program:
    """Parse the Prolog-style clause dialect into a normalized :class:`Program`."""
    ts = TokenStream(tokenize(text))
    names = {"init_pred": DEFAULT_INIT, "safe_pred": DEFAULT_SAFE, "unsafe_pred": DEFAULT_UNSAFE}
    extra_init: set[str] = set()
    var_decl = None
    clauses: list[Clause] = []
    while ts.peek.kind != "eof":
        if ts.accept(":-"):
            tok = ts.next()
            ts.expect("(")
            if tok.text in names or tok.text == "initial_pred":
                arg = ts.next()
                if arg.kind != "ident":
                    raise ts.error("expected a predicate name", arg)
                if tok.text == "initial_pred":
                    extra_init.add(arg.text)
                else:
                    names[tok.text] = arg.text
            elif tok.text == "init_vars":
                vs = []
                while ts.peek.kind == "var":
                    vs.append(ts.next().text)
                    if not ts.accept(","):
                        break
                var_decl = tuple(vs)
            else:
                raise ts.error(f"unknown directive {tok.text!r}", tok)
            ts.expect(")")
            ts.expect(".")
            continue
        head = _parse_atom(ts)
        atoms: list = []
        body: list = []
        if ts.accept(":-"):
            while True:
                tok = ts.peek
                if tok.kind == "ident" and tok.text == "true":
                    ts.next()
                elif tok.kind == "ident" and tok.text == "false":
                    ts.next()
                    atoms.append(False)
                elif tok.kind == "ident":
                    body.append(_parse_atom(ts))
                else:
                    atoms.extend(parse_comparison(ts))
                if not ts.accept(","):
                    break
        ts.expect(".")
        clauses.append(_build_clause(head, atoms, body, f"c{len(clauses) + 1}"))
    return Program(tuple(clauses), names["init_pred"], names["safe_pred"], names["unsafe_pred"],
                   frozenset(extra_init), var_decl)


def _parse_atom(ts: TokenStream) -> tuple[str, list[LinTerm]]:
    tok = ts.next()
    if tok.kind != "ident":
        raise ts.error(f"expected a predicate, found {tok.text or 'end of input'!r}", tok)
    args: list[LinTerm] = []
    if ts.accept("("):
        while True:
            args.append(parse_expr(ts))
            if not ts.accept(","):
                break
        ts.expect(")")
    return tok.text, args


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def normalize(p: Program) -> Program:
    """Make atom arguments pairwise-distinct variables (idempotent)."""
    out = []
    for c in p.clauses:
        dup = any(len(set(a.args)) != len(a.args) for a in (c.head, *c.body))
        if not dup:
            out.append(c)
            continue
        head = (c.head.pred, [LinTerm.var(v) for v in c.head.args])
        body = [(a.pred, [LinTerm.var(v) for v in a.args]) for a in c.body]
        nc = _build_clause(head, list(c.constraint.constraints), body, c.id)
        out.append(replace(nc, origin=c.origin))
    return replace(p, clauses=tuple(out))


def print_program(p: Program) -> str:
    lines = []
    defaults = {"init_pred": DEFAULT_INIT, "safe_pred": DEFAULT_SAFE, "unsafe_pred": DEFAULT_UNSAFE}
    for key, default in defaults.items():
        if getattr(p, key) != default:
            lines.append(f":- {key}({getattr(p, key)}).")
    for extra in sorted(p.init_preds - {p.init_pred}):
        lines.append(f":- initial_pred({extra}).")
    bare = Program(p.clauses, p.init_pred, p.safe_pred, p.unsafe_pred, p.init_preds)
    if bare.var_decl != p.var_decl:
        lines.append(f":- init_vars({','.join(p.var_decl)}).")
    lines.extend(str(c) for c in p.clauses)
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# structural notions


def initial_clauses(p: Program) -> list[Clause]:
    return [c for c in p.clauses if p.is_initial(c)]


def dependency_graph(p: Program) -> dict[str, set[str]]:
    g: dict[str, set[str]] = {q: set() for q in p.predicates}
    for c in p.clauses:
        g.setdefault(c.head.pred, set()).update(a.pred for a in c.body)
    return g


def reachable_from(p: Program, roots: Iterable[str]) -> set[str]:
    g = dependency_graph(p)
    seen: set[str] = set()
    stack = [r for r in roots if r in g]
    while stack:
        q = stack.pop()
        if q in seen:
            continue
        seen.add(q)
        stack.extend(g.get(q, ()))
    return seen


def sccs(p: Program) -> dict[str, int]:
    """Map each predicate to the index of its strongly connected component."""
    g = dependency_graph(p)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on: set[str] = set()
    stack: list[str] = []
    comp: dict[str, int] = {}
    counter = itertools.count()
    ncomp = itertools.count()

    def visit(v):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on.add(v)
        for w in sorted(g.get(v, ())):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            k = next(ncomp)
            while True:
                w = stack.pop()
                on.discard(w)
                comp[w] = k
                if w == v:
                    break

    for v in sorted(g):
        if v not in index:
            visit(v)
    return comp


@dataclass
class Diagnostics:
    ok: bool
    messages: list[str] = field(default_factory=list)
    offending: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def check_wellformed(p: Program) -> Diagnostics:
    """Every constrained fact reachable from safe/unsafe must be an initial clause."""
    live = reachable_from(p, [p.safe_pred, p.unsafe_pred])
    bad = [c for c in p.clauses if c.is_fact and c.head.pred in live and c.head.pred not in p.init_preds]
    msgs = [f"{c.id}: constrained fact for non-initial predicate {c.head.pred}" for c in bad]
    if not p.clauses:
        msgs.append("program has no clauses")
    return Diagnostics(not msgs, msgs, bad)


# ---------------------------------------------------------------------------
# derivation trees


@dataclass(frozen=True)
class DerivationTree:
    """An AND-tree node: the clause used, its renamed instance and the subtrees."""

    clause_id: str
    instance: Clause
    children: tuple[DerivationTree, ...] = ()

    def nodes(self) -> Iterator[DerivationTree]:
        yield self
        for ch in self.children:
            yield from ch.nodes()

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0)

    def skeleton(self) -> tuple:
        return (self.clause_id, tuple(c.skeleton() for c in self.children))

    def check(self, p: Program) -> None:
        """Raise ``ValueError`` unless this is a structurally valid tree of ``p``."""
        for n in self.nodes():
            try:
                src = p.clause(n.clause_id)
            except KeyError:
                raise ValueError(f"clause {n.clause_id} not in program") from None
            if len(n.children) != len(src.body):
                raise ValueError(f"node {n.clause_id}: wrong number of children")
            for ch, a in zip(n.children, n.instance.body):
                if ch.instance.head.pred != a.pred or ch.instance.head.args != a.args:
                    raise ValueError(f"node {n.clause_id}: child {ch.clause_id} does not match {a}")


def tree_constraint(t: DerivationTree) -> Conjunction:
    """Conjunction of all node constraints (instances already share variables)."""
    out = TRUE_CONJ
    for n in t.nodes():
        out = out & n.instance.constraint
    return out


def is_feasible(t: DerivationTree, integer: bool = False) -> bool:
    return is_sat(tree_constraint(t), integer)


def instantiate(c: Clause, head_args: Sequence[str], fresh: Iterator[str]) -> Clause:
    """Rename ``c`` so its head arguments are ``head_args`` and all other variables fresh."""
    mapping = dict(zip(c.head.args, head_args))
    for v in sorted(c.vars - set(c.head.args)):
        mapping[v] = next(fresh)
    return c.rename(mapping)


__all__ = [
    "Atom", "Clause", "Program", "DerivationTree", "Diagnostics", "ParseError",
    "parse", "parse_file", "normalize", "print_program", "initial_clauses", "check_wellformed",
    "tree_constraint", "is_feasible", "instantiate", "dependency_graph", "reachable_from", "sccs",
]
