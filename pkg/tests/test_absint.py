from hypothesis import given, settings
from hypothesis import strategies as st

from chcpre.absint import analyze, hull, is_model, leq, thresholds, to_positional, widen
from chcpre.chc import parse, parse_file
from chcpre.linarith import Conjunction, conj_entails, make_row
from chcpre.syntax import parse_formula
from chcpre.transforms import query_answer_transform

from oracles import CORPUS, FIXTURES


def conj(text, args=("A", "B")):
    """Parse a conjunction over ``args`` and rename it to positional variables."""
    (d,) = parse_formula(text).disjuncts
    return to_positional(d, args)


def test_counter_invariant():
    v = analyze(parse("p(0).\np(X+1) :- p(X)."), integer=True)
    assert str(v["p"]) == "$1>=0"


def test_unreachable_predicate_is_bottom():
    v = analyze(parse("p(X) :- X>0, X<0.\nq(X) :- p(X).\nr(1)."))
    assert "p" not in v and "q" not in v and str(v["r"]) == "$1=1"


def test_answer_invariant_of_triangular_loop():
    """The query-answer analysis bounds p from below: A >= B and B >= 0."""
    qa = query_answer_transform(parse_file(FIXTURES / "cs-tiny.chc"), "unsafe")
    v = analyze(qa, integer=True)
    assert conj_entails(v["p__a"], conj("A >= B, B >= 0"), integer=True)
    assert is_model(qa, v, integer=True)


def test_results_are_post_fixpoints_on_corpus():
    for path in sorted(CORPUS.glob("*.chc")):
        p = parse_file(path)
        for integer in (False, True):
            assert is_model(p, analyze(p, integer=integer), integer), path.name


def test_widen_keeps_stable_constraints_and_thresholds():
    old = conj("A >= 0, A =< 1")
    new = conj("A >= 0, A =< 2")
    assert str(widen(old, new)) == "$1>=0"
    limit = make_row({"$1": 1}, -10, "<=")
    assert str(widen(old, new, limits=[limit])) == "$1>=0, $1=<10"


def test_thresholds_include_negations():
    p = parse("init(A).\nw(A) :- init(A).\nw(B) :- A<5, B=A+1, w(A).\nsafe :- A>=5, w(A).")
    rows = {str(r) for r in thresholds(p, integer=True)["w"]}
    assert {"$1=<4", "$1>=5"} <= rows


points = st.tuples(st.integers(-5, 5), st.integers(-5, 5))


@settings(max_examples=500, deadline=None)
@given(st.lists(points, min_size=1, max_size=12))
def test_widening_chain_stabilises(pts):
    """Feeding arbitrary points through hull-then-widen reaches a fixpoint quickly and covers them all."""
    def point(x, y):
        return conj(f"A = {x}, B = {y}")

    cur = point(*pts[0])
    seen = [pts[0]]
    changes = 0
    for x, y in pts[1:] * 3:
        joined = hull(cur, point(x, y))
        nxt = widen(cur, joined)
        if not leq(nxt, cur):
            changes += 1
            cur = nxt
        seen.append((x, y))
    # a widened chain can only drop constraints, and the first element has at most 4
    assert changes <= 5
    for x, y in seen:
        assert cur.evaluate({"$1": x, "$2": y})
    assert isinstance(cur, Conjunction)
