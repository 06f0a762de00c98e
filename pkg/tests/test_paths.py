import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpseries.errors import BadPosition, MalformedString, RangeViolation
from qpseries.model import (OperatorInstance, PotentialSpec, golden_frequency,
                            kernel_from_orders, laplacian_kernel)
from qpseries.paths import (PathString, PathWeightContext, attach,
                            compute_series_path_sum, cont, enumerate_paths,
                            make_path, parse_path, print_path)
from qpseries.series import compute_series_longrange

CLASSIC_STRINGS = [
    "(1234321)",
    "(12345(12321)5434321)",
    "(12345(12321)5(121)54321)",
    "(12345(121)5(12321)54321)",
    "(123[456[5]654]321)",
    "(123[454]3[2]321)",
    "(12345(-1)5(-1)54321)",
    "(12345(123(1234321)321)543)",
]


@pytest.mark.parametrize("text", CLASSIC_STRINGS)
def test_round_trip_classic_strings(text):
    p = parse_path(text)
    assert print_path(p) == text
    assert parse_path(print_path(p)) == p


def test_round_trip_separated_and_orders():
    for text in ["( 12 3 12 )", "(1,0 1,1 1,0)", "(2^2 4^2 2^2)", "(2^2)^2"]:
        p = parse_path(text)
        assert parse_path(print_path(p)) == p


# random path trees: segments of bounded depth with mixed coordinates/orders
def _segments(depth):
    from qpseries.paths import Segment

    coord = st.integers(-11, 11).filter(bool).map(lambda n: (n,))
    order = st.integers(1, 3)
    if depth == 0:
        child = st.nothing()
    else:
        child = st.deferred(lambda: _segments(depth - 1))

    def build(coords, entry, steps, exit_order, kids):
        anchored = tuple(sorted(
            ((min(a, len(coords) - 1), ch) for a, ch in kids), key=lambda p: p[0]))
        return Segment(coords=tuple(coords), entry_order=entry,
                       step_orders=tuple(steps[:len(coords) - 1]),
                       exit_order=exit_order, children=anchored)

    return st.builds(
        build,
        st.lists(coord, min_size=1, max_size=5),
        order,
        st.lists(order, min_size=4, max_size=4),
        order,
        st.lists(st.tuples(st.integers(0, 4), child), max_size=2) if depth else st.just([]),
    )


@settings(max_examples=120, deadline=None)
@given(_segments(2), st.sampled_from(["eigenvalue", "eigenvector"]))
def test_round_trip_random_trees(seg, kind):
    from qpseries.paths import Segment

    if kind == "eigenvector":
        seg = Segment(coords=seg.coords, entry_order=seg.entry_order,
                      step_orders=seg.step_orders, exit_order=None,
                      children=seg.children)
    p = PathString(kind=kind, root=seg, dimension=1)
    assert parse_path(print_path(p), kind=kind) == p


def test_malformed_strings():
    for text in ["(12(34", "(12]34)", "()", "(1", "1234)", "(12[)", "(a)",
                 "(1[[2]3]1)"]:  # marks sharing a flank are rejected
        with pytest.raises(MalformedString):
            parse_path(text)


def test_restatement_required():
    with pytest.raises(MalformedString, match="restated"):
        parse_path("(12345(12321)434321)")  # 5 not restated after the ascent


def test_lengths():
    assert parse_path("(1)").length == 2
    assert parse_path("(1234321)").length == 8
    assert parse_path("(12345(12321)5434321)").length == 18
    assert parse_path("(1234321)", kind="eigenvector").length == 7
    assert parse_path("(2^2 4^2 2^2)^2", kind="eigenvalue").length == 8


def test_cont_simple_loop(maryland):
    ctx = PathWeightContext(instance=maryland)
    v0 = maryland.v(0)
    assert cont(parse_path("(1)"), ctx) == pytest.approx(1.0 / (v0 - maryland.v(1)), rel=1e-14)


def test_cont_hand_product(maryland):
    # (121): edges 0->1, 1->2, 2->1, 1->0
    ctx = PathWeightContext(instance=maryland)
    v0 = maryland.v(0)
    d1 = v0 - maryland.v(1)
    d2 = v0 - maryland.v(2)
    want = (1.0 / d1) * (1.0 / d2) * (1.0 / d1) * 1.0
    assert cont(parse_path("(121)"), ctx) == pytest.approx(want, rel=1e-13)


def test_cont_range_violation(maryland):
    ctx = PathWeightContext(instance=maryland)
    with pytest.raises(RangeViolation):
        cont(make_path("eigenvalue", [2]), ctx)


def test_attachment_example_and_identity(maryland):
    base = parse_path("(1234543)", kind="eigenvector")
    loop = parse_path("(12321)")
    att = attach(base, loop, 4)
    assert print_path(att) == "(12345(12321)543)"
    ctx = PathWeightContext(instance=maryland)
    lhs = cont(att, ctx)
    rhs = -(1.0 / (maryland.v(0) - maryland.v(5))) * cont(base, ctx) * cont(loop, ctx)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_attach_at_two_visits_distinct(maryland):
    base = parse_path("(1213121)")  # visits 1 four times
    loop = parse_path("(1)")
    s1 = print_path(attach(base, loop, 0))
    s2 = print_path(attach(base, loop, 2))
    assert s1 != s2
    assert parse_path(s1).length == parse_path(s2).length


def test_attach_bad_position(maryland):
    with pytest.raises(BadPosition):
        attach(parse_path("(121)"), parse_path("(1)"), 99)
    with pytest.raises(BadPosition):
        attach(parse_path("(121)"), parse_path("(121)", kind="eigenvector"), 0)


def test_enumerate_minimal(maryland):
    assert [print_path(p) for p in enumerate_paths(maryland, "eigenvalue", 2)] == \
        ["(-1)", "(1)"]
    assert list(enumerate_paths(maryland, "eigenvalue", 1)) == []
    assert list(enumerate_paths(maryland, "eigenvalue", 3)) == []


# ---------------------------------------------------------------------------
# independent walker: explicit sheet-stack DFS, no PathString machinery


def _walker_count(offsets, length, endpoint=None):
    """Count eigenvalue (endpoint None) or eigenvector paths by direct DFS."""
    zero = tuple(0 for _ in offsets[0])
    count = 0
    stack = []  # list of current coordinates per sheet (local frames)

    def go(cur, used):
        nonlocal count
        if endpoint is None:
            if not stack and used == length and cur == "closed":
                count += 1
                return
        if cur == "closed":
            return
        if used > length:
            return
        if endpoint is not None and not stack and used == length and cur == endpoint:
            count += 1
            # continuing is impossible at exact budget
        for off in offsets:
            nxt = tuple(a + b for a, b in zip(cur, off))
            if nxt == zero:
                if stack:
                    prev = stack.pop()
                    go(prev, used + 1)  # descend
                    stack.append(prev)
                elif endpoint is None:
                    go("closed", used + 1)  # closing edge
                continue
            go(nxt, used + 1)  # same-sheet step
        # ascend: open a new sheet anywhere
        for off in offsets:
            if used + 2 <= length:  # ascent needs at least entry + exit
                stack.append(cur)
                go(off, used + 1)
                stack.pop()

    for off in offsets:
        go(off, 1)
    return count


@pytest.mark.parametrize("s,d", [(2, 1), (4, 1), (6, 1), (2, 2), (4, 2)])
def test_enumeration_count_vs_walker(s, d):
    inst = OperatorInstance(PotentialSpec("maryland_tan"), golden_frequency(d),
                            0.13, 0.05, laplacian_kernel(d), n_check=10)
    offsets = inst.hopping.offsets(1)
    ours = len(list(enumerate_paths(inst, "eigenvalue", s)))
    theirs = _walker_count(offsets, s)
    assert ours == theirs


def test_enumeration_count_vs_walker_eigenvector(maryland):
    offsets = maryland.hopping.offsets(1)
    for s, k in [(3, (1,)), (4, (2,)), (5, (1,))]:
        ours = len(list(enumerate_paths(maryland, "eigenvector", s, endpoint=k)))
        theirs = _walker_count(offsets, s, endpoint=k)
        assert ours == theirs


def test_enumeration_unique_and_round_trips(maryland):
    for s in (4, 6):
        seen = set()
        for p in enumerate_paths(maryland, "eigenvalue", s):
            text = print_path(p)
            assert text not in seen
            seen.add(text)
            assert parse_path(text) == p
            assert p.length == s


def test_path_sum_equals_recursion(maryland):
    ps = compute_series_path_sum(maryland, 6)
    rec = compute_series_longrange(maryland, 6)
    for s in range(7):
        assert ps.lambdas[s] == pytest.approx(rec.lambdas[s], abs=1e-12)
        for n in set(ps.psis[s]) | set(rec.psis[s]):
            assert ps.psis[s].get(n, 0.0) == pytest.approx(rec.psis[s].get(n, 0.0), abs=1e-12)


def test_multi_order_enumeration(golden):
    kern = kernel_from_orders(1, 1, {1: {(1,): 1.0, (-1,): 1.0},
                                     2: {(2,): 0.5, (-2,): 0.5}})
    inst = OperatorInstance(PotentialSpec("maryland_tan"), golden, 0.1, 0.05, kern)
    ps = compute_series_path_sum(inst, 6)
    rec = compute_series_longrange(inst, 6)
    for s in range(7):
        assert ps.lambdas[s] == pytest.approx(rec.lambdas[s], abs=1e-12)


def test_xdep_zero_weight_edges_enumerated(golden):
    # an amplitude vanishing at some phases must not change the path set
    phi = lambda x: math.sin(2 * math.pi * x)
    kern = kernel_from_orders(1, 1, {1: {(1,): phi, (-1,): phi}})
    inst = OperatorInstance(PotentialSpec("maryland_tan"), golden, 0.11, 0.05, kern)
    paths = list(enumerate_paths(inst, "eigenvalue", 4))
    const = OperatorInstance(PotentialSpec("maryland_tan"), golden, 0.11, 0.05,
                             laplacian_kernel(1))
    assert len(paths) == len(list(enumerate_paths(const, "eigenvalue", 4)))
    ps = compute_series_path_sum(inst, 5)
    rec = compute_series_longrange(inst, 5)
    for s in range(6):
        assert ps.lambdas[s] == pytest.approx(rec.lambdas[s], abs=1e-12)


def test_reconstruct_from_base_loop_by_attachments(maryland):
    # every enumerated path is its base loop plus finitely many attachments
    def rebuild(path):
        def loop_of(seg, kind):
            bare = make_path(kind, seg.coords, dimension=path.dimension,
                             entry_order=seg.entry_order, step_orders=seg.step_orders,
                             exit_order=seg.exit_order if kind == "eigenvalue" else None)
            return bare

        def build(seg, kind):
            out = loop_of(seg, kind)
            for a, ch in seg.children:
                sub = build(ch, "eigenvalue")
                vis = out.visits()
                pos = max(i for i, (addr, idx, _) in enumerate(vis)
                          if addr == () and idx == a)
                out = attach(out, sub, pos)
            return out

        return build(path.root, path.kind)

    checked = 0
    for p in enumerate_paths(maryland, "eigenvalue", 8):
        if p.root.children:
            assert rebuild(p) == p
            checked += 1
    assert checked > 0
