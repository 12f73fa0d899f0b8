"""Iterative inference of sufficient preconditions for safety and unsafety."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .chc import DerivationTree, Program, check_wellformed
from .linarith import (
    DEFAULT_DNF_CAP,
    DnfFormula,
    DnfSizeError,
    conjoin,
    disjoin,
    entails,
    integer_tighten,
    is_false,
    negate,
    simplify,
)
from .transforms import (
    CS,
    PE,
    TE,
    constraint_specialise,
    eliminate_trace,
    extract_np,
    find_feasible_derivation,
    init_replace,
    initial_nodes,
    partial_evaluate,
    theta_of_tree,
    u_approximate,
)

DEFAULT_ORDER = (PE, CS, TE)
DEFAULT_SEQ_LENGTH = 3
DEFAULT_MAX_ITERATIONS = 10
DEFAULT_DEPTH_BOUND = 12

OPTIMAL = "optimal"
SAFE_NON_TRIVIAL = "safe-non-trivial"
UNSAFE_NON_TRIVIAL = "unsafe-non-trivial"
BOTH_NON_TRIVIAL = "both-non-trivial"
BOTH_TRIVIAL = "both-trivial"

# why the loop stopped
STOP_OPTIMAL = "optimal"
STOP_NO_PROGRESS = "no-progress"
STOP_MAX_ITERATIONS = "max-iterations"
STOP_DNF_CAP = "dnf-cap"

StepHook = Callable[[str, int, int, str, Program], None]


@dataclass
class Options:
    integer: bool = True
    seq_length: int = DEFAULT_SEQ_LENGTH
    order: Sequence[str] = DEFAULT_ORDER
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    depth_bound: int = DEFAULT_DEPTH_BOUND
    dnf_cap: int = DEFAULT_DNF_CAP
    # per-iteration step lists; the last entry repeats (overrides order/seq_length)
    schedule: Optional[Sequence[Sequence[str]]] = None
    # feed each side's accumulated theta (restricted to the open region) into the next
    # iteration; with False, every iteration starts from false and removed trees are forgotten
    carry_theta: bool = True
    on_step: Optional[StepHook] = None

    def __post_init__(self):
        if self.seq_length < 1:
            raise ValueError("seq_length must be at least 1")
        for name in ("max_iterations", "depth_bound", "dnf_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for k in [*self.order, *(k for s in self.schedule or () for k in s)]:
            if k not in (PE, CS, TE):
                raise ValueError(f"unknown transformation {k!r}")

    def steps(self, iteration: int) -> list[str]:
        if self.schedule:
            return list(self.schedule[min(iteration, len(self.schedule) - 1)])
        return [self.order[i % len(self.order)] for i in range(self.seq_length)]


@dataclass
class StepInfo:
    """What one transformation did: a removed tree, and whether its theta had several initial nodes."""

    kind: str
    tree: Optional[DerivationTree] = None
    multi_initial: bool = False


def tr_step(p: Program, phi: DnfFormula, goal: str, kind: str, opts: Options | None = None,
            info: list | None = None) -> tuple[Program, DnfFormula]:
    """Apply one transformation; TE also disjoins the removed tree's theta into ``phi``."""
    opts = opts or Options()
    step = StepInfo(kind)
    if info is not None:
        info.append(step)
    if kind == PE:
        return partial_evaluate(p, goal, opts.integer), phi
    if kind == CS:
        return constraint_specialise(p, goal, opts.integer), phi
    if kind == TE:
        t = find_feasible_derivation(p, goal, opts.depth_bound, opts.integer)
        if t is None:
            return p, phi
        step.tree = t
        step.multi_initial = len(initial_nodes(p, t)) > 1
        theta = theta_of_tree(p, t, opts.integer)
        return eliminate_trace(p, t, goal), simplify(disjoin(phi, theta), opts.integer)
    raise ValueError(f"unknown transformation {kind!r}")


def tr_seq(p: Program, phi: DnfFormula, goal: str, steps: Sequence[str], opts: Options | None = None,
           iteration: int = 0, info: list | None = None) -> tuple[Program, DnfFormula]:
    """Compose :func:`tr_step` over ``steps``."""
    opts = opts or Options()
    for i, kind in enumerate(steps):
        p, phi = tr_step(p, phi, goal, kind, opts, info)
        if opts.on_step:
            opts.on_step(goal, iteration, i + 1, kind, p)
    return p, phi


@dataclass
class IterationRecord:
    iteration: int
    steps: list[str]
    np_safe: DnfFormula
    np_unsafe: DnfFormula
    phi_new: DnfFormula
    sp_safe: DnfFormula
    sp_unsafe: DnfFormula
    multi_initial: bool
    seconds: float


@dataclass
class InferenceReport:
    """Sufficient preconditions for safety and unsafety plus how they were reached.

    ``sp_safe`` is built from ``np_safe and not np_unsafe`` pieces: states
    that can only reach safe terminal states, if they terminate at all.
    """

    sp_safe: DnfFormula
    sp_unsafe: DnfFormula
    np_safe_last: DnfFormula
    np_unsafe_last: DnfFormula
    nonterm_candidate: DnfFormula
    classification: str
    iterations: int
    stop_reason: str
    truncated: bool = False
    progress_violations: int = 0
    multi_initial_theta: bool = False
    trace: list[IterationRecord] = field(default_factory=list)
    seconds: float = 0.0


def nonterm_candidate(np_s: DnfFormula, np_u: DnfFormula, integer: bool = True,
                      cap: int = DEFAULT_DNF_CAP) -> DnfFormula:
    """States outside both over-approximations: they reach neither safe nor unsafe."""
    f = simplify(negate(disjoin(np_s, np_u), integer, cap), integer, merge=True)
    if integer:
        f = DnfFormula.of([integer_tighten(d) for d in f.disjuncts], f.scope)
    return f


def classify(sp_safe: DnfFormula, sp_unsafe: DnfFormula, optimal: bool, integer: bool = True) -> str:
    if optimal:
        return OPTIMAL
    s = not is_false(sp_safe, integer)
    u = not is_false(sp_unsafe, integer)
    if s and u:
        return BOTH_NON_TRIVIAL
    if s:
        return SAFE_NON_TRIVIAL
    if u:
        return UNSAFE_NON_TRIVIAL
    return BOTH_TRIVIAL


def infer(p: Program, opts: Options | None = None) -> InferenceReport:
    """Refine necessary preconditions until they are disjoint or stop getting stronger."""
    opts = opts or Options()
    diag = check_wellformed(p)
    if not diag:
        raise ValueError("; ".join(diag.messages))
    integer, cap = opts.integer, opts.dnf_cap
    start = time.perf_counter()
    scope = p.var_decl
    false = DnfFormula.false(scope)
    sp_s, sp_u = false, false
    np_s = np_u = extract_np(p, integer)
    phi_old = np_s
    p_s = p_u = p
    th_s = th_u = false
    trace: list[IterationRecord] = []
    violations = 0
    multi = False
    stop, optimal, truncated = STOP_MAX_ITERATIONS, False, False
    iteration = 0
    while iteration < opts.max_iterations:
        t0 = time.perf_counter()
        steps = opts.steps(iteration)
        try:
            info_s, info_u = [], []
            seed_s = simplify(conjoin(th_s, phi_old, integer, cap), integer) if opts.carry_theta else false
            seed_u = simplify(conjoin(th_u, phi_old, integer, cap), integer) if opts.carry_theta else false
            q_s, th_s = tr_seq(p_s, seed_s, p.safe_pred, steps, opts, iteration, info_s)
            q_u, th_u = tr_seq(p_u, seed_u, p.unsafe_pred, steps, opts, iteration, info_u)
            phi_s = simplify(disjoin(extract_np(q_s, integer), th_s), integer, merge=True)
            phi_u = simplify(disjoin(extract_np(q_u, integer), th_u), integer, merge=True)
            phi_new = simplify(conjoin(phi_s, phi_u, integer, cap), integer, merge=True)
            done = is_false(phi_new, integer)
            if done:
                new_s = simplify(disjoin(sp_s, phi_s), integer, merge=True)
                new_u = simplify(disjoin(sp_u, phi_u), integer, merge=True)
                stagnant = False
            else:
                only_s = conjoin(phi_s, negate(phi_u, integer, cap), integer, cap)
                only_u = conjoin(phi_u, negate(phi_s, integer, cap), integer, cap)
                new_s = simplify(disjoin(sp_s, only_s), integer, merge=True)
                new_u = simplify(disjoin(sp_u, only_u), integer, merge=True)
                stagnant = entails(phi_old, phi_new, integer)
                if not stagnant:
                    next_s = u_approximate(q_s, phi_new, integer)
                    next_u = u_approximate(q_u, phi_new, integer)
        except DnfSizeError:
            stop, truncated = STOP_DNF_CAP, True
            break
        sp_s, sp_u, np_s, np_u = new_s, new_u, phi_s, phi_u
        multi = multi or any(i.multi_initial for i in info_s + info_u)
        trace.append(IterationRecord(iteration, steps, phi_s, phi_u, phi_new, sp_s, sp_u,
                                     any(i.multi_initial for i in info_s + info_u),
                                     time.perf_counter() - t0))
        iteration += 1
        if done:
            stop, optimal = STOP_OPTIMAL, True
            break
        if stagnant:
            stop = STOP_NO_PROGRESS
            break
        if not entails(phi_new, phi_old, integer):
            violations += 1
        phi_old = phi_new
        p_s, p_u = next_s, next_u
    else:
        truncated = True
    try:
        # states classified in earlier iterations lie outside the last NPs' region
        nonterm = nonterm_candidate(disjoin(np_s, sp_s), disjoin(np_u, sp_u), integer, cap)
    except DnfSizeError:
        nonterm, truncated = DnfFormula.false(scope), True
    return InferenceReport(
        sp_safe=sp_s, sp_unsafe=sp_u, np_safe_last=np_s, np_unsafe_last=np_u,
        nonterm_candidate=nonterm, classification=classify(sp_s, sp_u, optimal, integer),
        iterations=iteration, stop_reason=stop, truncated=truncated,
        progress_violations=violations, multi_initial_theta=multi, trace=trace,
        seconds=time.perf_counter() - start,
    )


@dataclass
class Violation:
    side: str
    disjunct: str
    tree: DerivationTree


@dataclass
class SoundnessResult:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_soundness(p: Program, sp_safe: DnfFormula, sp_unsafe: DnfFormula,
                    depth_bound: int = 10, integer: bool = True) -> SoundnessResult:
    """Search for bounded counterexamples: an SP disjunct from which the opposite goal is derivable."""
    out = []
    for side, sp, other in (("safe", sp_safe, p.unsafe_pred), ("unsafe", sp_unsafe, p.safe_pred)):
        for d in sp.disjuncts:
            q = init_replace(p, DnfFormula.of([d], p.var_decl))
            t = find_feasible_derivation(q, other, depth_bound, integer)
            if t is not None:
                out.append(Violation(side, str(d), t))
    return SoundnessResult(out)
