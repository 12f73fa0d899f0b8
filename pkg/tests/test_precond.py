import pytest

from chcpre.chc import parse, parse_file
from chcpre.linarith import DnfFormula, conjoin, entails, equivalent, is_false
from chcpre.precond import (
    BOTH_NON_TRIVIAL,
    BOTH_TRIVIAL,
    OPTIMAL,
    SAFE_NON_TRIVIAL,
    STOP_MAX_ITERATIONS,
    STOP_OPTIMAL,
    UNSAFE_NON_TRIVIAL,
    Options,
    check_soundness,
    classify,
    infer,
    nonterm_candidate,
    tr_step,
)
from chcpre.syntax import parse_formula
from chcpre.transforms import CS, PE, TE

from oracles import CORPUS

RUNNING = parse_file(CORPUS / "running-example.chc")
SAFE_TARGET = "(B >= 0, A =< 0) ; (B >= A, A >= 1)"
UNSAFE_TARGET = "(B < 0) ; (B >= 0, A > B)"


def F(text):
    return parse_formula(text)


def test_running_example_with_defaults():
    r = infer(RUNNING)
    assert r.classification == OPTIMAL and r.stop_reason == STOP_OPTIMAL
    assert r.iterations <= 3 and not r.truncated
    assert equivalent(r.sp_safe, F(SAFE_TARGET), integer=True)
    assert equivalent(r.sp_unsafe, F(UNSAFE_TARGET), integer=True)
    assert is_false(r.nonterm_candidate, integer=True)


def test_pe_then_refine_then_cs_takes_two_iterations():
    r = infer(RUNNING, Options(schedule=[[PE], [CS]]))
    assert (r.classification, r.iterations) == (OPTIMAL, 2)
    assert equivalent(r.sp_safe, F(SAFE_TARGET), integer=True)
    assert equivalent(r.sp_unsafe, F(UNSAFE_TARGET), integer=True)


@pytest.mark.xfail(strict=True, reason="the hull of the unsafe query set is the whole plane, so CS first learns nothing")
def test_cs_then_pe_in_one_iteration():
    r = infer(RUNNING, Options(schedule=[[CS, PE]]))
    assert r.iterations == 1 and r.classification == OPTIMAL


def test_nonterm_example():
    r = infer(parse_file(CORPUS / "nonterm.chc"))
    assert equivalent(r.np_safe_last, F("A >= 11"), integer=True)
    assert equivalent(r.np_unsafe_last, F("A < 0"), integer=True)
    assert equivalent(r.nonterm_candidate, F("A >= 0, A =< 10"), integer=True)


def test_nonterm_candidate_examples():
    assert is_false(nonterm_candidate(DnfFormula.true(), F("A >= 3")), integer=True)
    assert is_false(nonterm_candidate(F("B >= 0"), F("(B < 0) ; (A >= 1)")), integer=True)
    assert equivalent(nonterm_candidate(F("A >= 11"), F("A < 0")), F("A >= 0, A =< 10"), integer=True)


@pytest.mark.parametrize("s, u, optimal, expected", [
    ("A >= 0", "A < 0", True, OPTIMAL),
    ("A >= 0", "A < 0", False, BOTH_NON_TRIVIAL),
    ("A >= 0", "false", False, SAFE_NON_TRIVIAL),
    ("false", "A < 0", False, UNSAFE_NON_TRIVIAL),
    ("false", "A > 0, A < 1", False, BOTH_TRIVIAL),
])
def test_classify(s, u, optimal, expected):
    assert classify(F(s), F(u), optimal) == expected


def test_soundness_check_detects_a_corrupted_precondition():
    r = infer(RUNNING)
    assert check_soundness(RUNNING, r.sp_safe, r.sp_unsafe).ok
    bad = F(f"{SAFE_TARGET} ; (A >= 1, A > B)")
    res = check_soundness(RUNNING, bad, r.sp_unsafe)
    assert not res.ok
    (v,) = res.violations
    assert v.side == "safe"
    v.tree.check(RUNNING)
    assert check_soundness(RUNNING, DnfFormula.false(), DnfFormula.false()).ok


def test_forgetting_removed_trees_is_unsound_on_two_phase():
    """Restarting every iteration from false loses the initial states of eliminated trees."""
    p = parse_file(CORPUS / "two-phase.chc")
    literal = infer(p, Options(carry_theta=False))
    res = check_soundness(p, literal.sp_safe, literal.sp_unsafe)
    assert not res.ok and {v.side for v in res.violations} == {"safe"}
    # the witness starts at A = 0, B = 6, which drives x to 6
    fixed = infer(p)
    assert check_soundness(p, fixed.sp_safe, fixed.sp_unsafe).ok
    assert not entails(F("A = 0, B = 6"), fixed.sp_safe, integer=True)


@pytest.mark.parametrize("name", ["running-example", "two-phase", "countdown", "triangular"])
def test_sps_are_disjoint_and_grow_monotonically(name):
    r = infer(parse_file(CORPUS / f"{name}.chc"))
    assert is_false(conjoin(r.sp_safe, r.sp_unsafe), integer=True)
    for a, b in zip(r.trace, r.trace[1:]):
        assert entails(a.sp_safe, b.sp_safe, integer=True)
        assert entails(a.sp_unsafe, b.sp_unsafe, integer=True)
    assert r.progress_violations == 0


def test_max_iterations_truncates():
    r = infer(parse_file(CORPUS / "countdown.chc"), Options(max_iterations=2))
    assert r.iterations == 2 and r.truncated and r.stop_reason == STOP_MAX_ITERATIONS


def test_unreachable_unsafe_is_optimal():
    r = infer(parse_file(CORPUS / "unsafe-unreachable.chc"))
    assert r.classification == OPTIMAL
    assert is_false(r.sp_unsafe, integer=True)


def test_inference_is_deterministic():
    a, b = infer(RUNNING), infer(RUNNING)
    assert [str(x) for x in (a.sp_safe, a.sp_unsafe, a.nonterm_candidate)] == \
           [str(x) for x in (b.sp_safe, b.sp_unsafe, b.nonterm_candidate)]


def test_te_step_without_tree_is_identity():
    p = parse("init(A).\nw(A) :- A>0, init(A).\nunsafe :- A<0, w(A).\nsafe :- w(A).\n")
    info = []
    q, phi = tr_step(p, DnfFormula.false(p.var_decl), "unsafe", TE, Options(), info)
    assert q == p and is_false(phi)
    assert info[0].tree is None


def test_options_validation_and_malformed_programs():
    with pytest.raises(ValueError):
        Options(seq_length=0)
    with pytest.raises(ValueError):
        Options(order=("XX",))
    with pytest.raises(ValueError):
        infer(parse("unsafe :- B>A, p(A,B).\np(A,B) :- A=1, B=0.\n"))
