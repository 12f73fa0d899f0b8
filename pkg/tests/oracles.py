"""Independent reference computations used to freeze and cross-check expected values."""
from __future__ import annotations

import itertools
from fractions import Fraction
from pathlib import Path

from chcpre.chc import DerivationTree, Program, instantiate, is_feasible

CORPUS = Path(__file__).resolve().parents[1] / "src" / "chcpre" / "corpus"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def grid(names, radius=4, step=Fraction(1)):
    """All points of the box [-radius, radius]^n on a lattice of the given step."""
    k = int(radius / step)
    axis = [step * i for i in range(-k, k + 1)]
    for vals in itertools.product(axis, repeat=len(names)):
        yield dict(zip(names, vals))


def models(f, names, radius=4, step=Fraction(1)):
    """The grid points satisfying ``f`` (anything with ``evaluate``)."""
    return {tuple(pt[n] for n in names) for pt in grid(names, radius, step) if f.evaluate(pt)}


def interval_of(conj, var, point):
    """Feasible interval of ``var`` after fixing the other variables at ``point``.

    Returns ``None`` when empty; bounds are ``(value, strict)`` or ``None`` for unbounded.
    """
    lo, hi = None, None
    for a in conj.constraints:
        k = a.coeff(var)
        rest = a.const + sum(c * point[v] for v, c in a.coeffs if v != var)
        if k == 0:
            val = Fraction(rest)
            ok = val <= 0 if a.rel == "<=" else val < 0 if a.rel == "<" else val == 0
            if not ok:
                return None
            continue
        bound = Fraction(-rest, k)
        strict = a.rel == "<"
        if a.rel == "=":
            cand = [(bound, False, "lo"), (bound, False, "hi")]
        elif k > 0:
            cand = [(bound, strict, "hi")]
        else:
            cand = [(bound, strict, "lo")]
        for b, s, side in cand:
            if side == "lo" and (lo is None or (b, s) > lo):
                lo = (b, s)
            if side == "hi" and (hi is None or (b, not s) < (hi[0], not hi[1])):
                hi = (b, s)
    if lo is not None and hi is not None:
        if lo[0] > hi[0] or (lo[0] == hi[0] and (lo[1] or hi[1])):
            return None
    return lo, hi


def convex_hull_2d(points):
    """Andrew's monotone chain; returns the hull vertices counter-clockwise."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def in_hull_2d(vertices, q):
    """Is point ``q`` inside (or on) the convex polygon given by ccw vertices?"""
    if len(vertices) == 1:
        return tuple(q) == tuple(vertices[0])
    if len(vertices) == 2:
        (ax, ay), (bx, by) = vertices
        cross = (bx - ax) * (q[1] - ay) - (by - ay) * (q[0] - ax)
        return cross == 0 and min(ax, bx) <= q[0] <= max(ax, bx) and min(ay, by) <= q[1] <= max(ay, by)
    n = len(vertices)
    for i in range(n):
        (ax, ay), (bx, by) = vertices[i], vertices[(i + 1) % n]
        if (bx - ax) * (q[1] - ay) - (by - ay) * (q[0] - ax) < 0:
            return False
    return True


def trees_of_skeleton(p: Program, sk, head_args, counter):
    """Instantiate a clause-id skeleton as a derivation tree (variables renamed apart)."""
    cid, kids = sk
    inst = instantiate(p.clause(cid), head_args, counter)
    children = tuple(trees_of_skeleton(p, k, b.args, counter) for k, b in zip(kids, inst.body))
    return DerivationTree(cid, inst, children)


def feasible_skeletons(p: Program, goal: str, depth: int, integer=True):
    """Brute force: every skeleton up to ``depth`` whose tree constraint is satisfiable."""
    from chcpre.transforms import skeletons

    out = []
    for sk in sorted(skeletons(p, goal, depth), key=repr):
        fresh = (f"_O{i}" for i in itertools.count())
        t = trees_of_skeleton(p, sk, (), fresh)
        if is_feasible(t, integer):
            out.append((t.depth, sk))
    return sorted(out, key=lambda x: (x[0], repr(x[1])))
