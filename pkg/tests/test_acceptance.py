"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import json
import os
import subprocess
import sys
import time
from functools import lru_cache

import pytest

from chcpre.absint import analyze, to_positional
from chcpre.chc import DerivationTree, instantiate, parse_file
from chcpre.linarith import conj_entails, conjoin, equivalent, is_false
from chcpre.precond import OPTIMAL, check_soundness, infer
from chcpre.syntax import parse_formula
from chcpre.transforms import (
    constraint_specialise,
    eliminate_trace,
    extract_np,
    find_feasible_derivation,
    origin_skeleton,
    partial_evaluate,
    query_answer_transform,
    skeletons,
)

import test_absint
import test_linarith
from oracles import CORPUS, FIXTURES

RUNNING = CORPUS / "running-example.chc"
TINY = FIXTURES / "cs-tiny.chc"


def F(text):
    return parse_formula(text)


def same(a, b):
    return equivalent(a, F(b), integer=True)


@lru_cache(maxsize=None)
def corpus_reports():
    return {path.name: (parse_file(path), infer(parse_file(path))) for path in sorted(CORPUS.glob("*.chc"))}


def running_example_end_to_end():
    t0 = time.perf_counter()
    r = infer(parse_file(RUNNING))
    secs = time.perf_counter() - t0
    ok = (r.classification == OPTIMAL and r.iterations <= 3 and secs < 5
          and same(r.sp_safe, "(B >= 0, A =< 0) ; (B >= A, A >= 1)")
          and same(r.sp_unsafe, "(B < 0) ; (B >= 0, A > B)"))
    return ok, f"{r.classification}, {r.iterations} iteration(s), {secs:.2f}s"


def first_pe_nps():
    p = parse_file(RUNNING)
    s = extract_np(partial_evaluate(p, "safe"))
    u = extract_np(partial_evaluate(p, "unsafe"))
    return same(s, "B >= 0") and same(u, "(B < 0) ; (A >= 1)"), f"safe {s} | unsafe {u}"


def pe_then_cs_optimal():
    p = parse_file(RUNNING)
    s = extract_np(constraint_specialise(partial_evaluate(p, "safe"), "safe"))
    u = extract_np(constraint_specialise(partial_evaluate(p, "unsafe"), "unsafe"))
    ok = (same(s, "(B >= 0, A =< 0) ; (A >= 1, B >= A)") and same(u, "(B < 0, A =< 0) ; (A >= 1, A > B)")
          and is_false(conjoin(s, u), integer=True))
    return ok, f"safe {s} | unsafe {u}"


def cs_fixture():
    p = parse_file(TINY)
    v = analyze(query_answer_transform(p, "unsafe"), integer=True)
    inv = to_positional(F("A >= B, B >= 0").disjuncts[0], ("A", "B"))
    entailed = "p__a" in v and conj_entails(v["p__a"], inv, integer=True)
    blocked = find_feasible_derivation(constraint_specialise(p, "unsafe"), "unsafe", 10) is None
    return entailed and blocked, f"answer invariant {v.get('p__a')}, unsafe blocked at depth 10: {blocked}"


def _chain(n):
    sk = ("c3", ())
    for _ in range(n):
        sk = ("c2", (sk,))
    return ("c1", (sk,))


def te_fixture():
    p = parse_file(TINY)
    fresh = (f"_K{i}" for i in range(100))
    root = instantiate(p.clause("c1"), (), fresh)
    leaf = instantiate(p.clause("c3"), root.body[0].args, fresh)
    q = eliminate_trace(p, DerivationTree("c1", root, (DerivationTree("c3", leaf),)), "unsafe")
    after = {origin_skeleton(q, sk) for sk in skeletons(q, "unsafe", 6)}
    kept = [n for n in range(1, 5) if _chain(n) in after]
    ok = _chain(0) not in after and kept == [1, 2, 3, 4]
    return ok, f"c1.c3 removed: {_chain(0) not in after}, c1.c2^n.c3 kept for n in {kept}"


def nontermination():
    t0 = time.perf_counter()
    r = infer(parse_file(CORPUS / "nonterm.chc"))
    secs = time.perf_counter() - t0
    ok = (same(r.np_safe_last, "A >= 11") and same(r.np_unsafe_last, "A < 0")
          and same(r.nonterm_candidate, "A >= 0, A =< 10") and secs < 5)
    return ok, f"candidate {r.nonterm_candidate}, {secs:.2f}s"


def soundness_suite():
    bad = []
    for name, (p, r) in corpus_reports().items():
        res = check_soundness(p, r.sp_safe, r.sp_unsafe, depth_bound=10)
        bad += [f"{name}: sp_{v.side} {v.disjunct}" for v in res.violations]
    n = len(corpus_reports())
    return n >= 10 and not bad, f"{n} programs, {len(bad)} violation(s) {bad or ''}".rstrip()


def progress():
    fails = {name: r.progress_violations for name, (_, r) in corpus_reports().items() if r.progress_violations}
    return not fails, f"{len(corpus_reports())} programs, failures {sum(fails.values())} {fails or ''}".rstrip()


KERNEL_PROPERTIES = [
    test_linarith.test_double_negation,
    test_linarith.test_projection_matches_interval_oracle,
    test_linarith.test_hull_contains_both,
    test_absint.test_widening_chain_stabilises,
    test_linarith.test_integer_tighten_brute_force,
]


def kernel_properties():
    failed = []
    for prop in KERNEL_PROPERTIES:
        try:
            prop()
        except Exception as e:  # noqa: BLE001 - any falsified property counts as a failure
            failed.append(f"{prop.__name__}: {type(e).__name__}")
    return not failed, f"{len(KERNEL_PROPERTIES)} properties x 500 examples, failed {failed or 0}"


def _cli_json(seed):
    env = dict(os.environ, PYTHONHASHSEED=str(seed))
    out = subprocess.run([sys.executable, "-m", "chcpre.cli", str(CORPUS), "--output", "json"],
                         capture_output=True, text=True, env=env, check=False)
    doc = json.loads(out.stdout)
    for v in doc.values():
        v.pop("timings", None)
    return json.dumps(doc, indent=2, sort_keys=True).encode()


def determinism():
    a, b = _cli_json(0), _cli_json(12345)
    return a == b, f"{len(a)} bytes per report, identical: {a == b}"


CRITERIA = [
    ("1 running example end-to-end", running_example_end_to_end),
    ("2 iteration-0 NPs after PE", first_pe_nps),
    ("3 PE then CS is optimal", pe_then_cs_optimal),
    ("4 CS fixture", cs_fixture),
    ("5 TE fixture", te_fixture),
    ("6 non-termination candidate", nontermination),
    ("7 soundness over corpus", soundness_suite),
    ("8 progress assertion", progress),
    ("9 kernel properties", kernel_properties),
    ("10 determinism", determinism),
]


@pytest.mark.parametrize("label, check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}")
    assert ok, detail
