"""Denominator leveling, canonical marking/translation, grouped contributions.

The grouping machinery turns the divergent term-by-term bounds of the raw
series into convergent ones: paths that differ only by toggling short return
segments between their marked (in-place) and ascended (translated) forms are
summed together, and the telescoping of nearly equal denominators produces
the cancellation.

A marked path is an ordinary :class:`~qpseries.paths.PathString` whose
segments carry mark spans; the nesting invariants live on the segment type.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from itertools import product as _iproduct

import mpmath

from .errors import (LevelShift, NotCanonical, PreconditionViolated,
                     ResonantSite)
from .model import FrequencyVector, laplacian_kernel, origin
from .paths import (PathString, PathWeightContext, Segment, cont,
                    enumerate_paths, iter_edges, print_path)
from .series import SeriesResult


# ---------------------------------------------------------------------------
# consistent denominator data


@dataclass(frozen=True)
class DenominatorData:
    """(level, safedist) functions from beta-bands of ||n.omega||.

    thresholds[k] = 1/floor(beta^(-k-1)); level(n) = k iff
    thresholds[k] <= ||n.omega|| < thresholds[k-1], with level(0) = +inf.
    safedist(level k) = ceil(c_safe * k^3), safedist(0) = 0.
    """

    beta: float
    c_safe: float
    frequency: FrequencyVector
    max_level: int = 48
    thresholds: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.c_safe <= 0.0:
            raise ValueError("C_safe must be positive")
        th = []
        for k in range(self.max_level + 1):
            denom = math.floor(self.beta ** (-k - 1))
            if denom < 1 or denom > 2**52:
                break
            th.append(1.0 / denom)
        object.__setattr__(self, "thresholds", tuple(th))

    @property
    def dimension(self):
        return self.frequency.dimension

    def level_of_norm(self, x):
        for k, b in enumerate(self.thresholds):
            if x >= b:
                return k
        return len(self.thresholds)  # deeper than the table: treat as last band

    def level(self, n):
        """level(n); +inf at the origin."""
        if not any(n):
            return math.inf
        return self.level_of_norm(self.frequency.torus_norm_at(n))

    def safedist_level(self, k):
        if k == 0:
            return 0
        if k == math.inf:
            return math.inf
        return math.ceil(self.c_safe * k**3)

    def safedist(self, n):
        """safedist(level(n)); +inf at the origin."""
        if not any(n):
            return math.inf
        return self.safedist_level(self.level(n))


def level_of(data, n):
    return data.level(tuple(n) if not isinstance(n, int) else (n,))


@dataclass
class ConsistencyReport:
    passed: bool
    beta: float
    c_safe: float
    box: int
    n_small: int
    c1_violations: list
    c2_violations: list
    largest_beta: float | None = None

    def summary(self):
        state = "pass" if self.passed else "FAIL"
        return (f"consistency[{state}] beta={self.beta:g} C_safe={self.c_safe:g} "
                f"box={self.box} smalls={self.n_small} "
                f"c1_viol={len(self.c1_violations)} c2_viol={len(self.c2_violations)}")


def _check_axioms(data, box, kernel):
    """Exhaustive (c1)/(c2) check over |m|,|n| <= box."""
    from .model import _box_iter

    d = data.dimension
    levels = {}
    for n in _box_iter(d, box):
        levels[n] = data.level(n)
    smalls = [n for n, lv in levels.items() if lv >= 1]
    c1 = []
    for i, m in enumerate(smalls):
        sd_m = data.safedist_level(levels[m])
        for n in smalls[i + 1:]:
            need = min(sd_m, data.safedist_level(levels[n]))
            dmn = kernel.distance(tuple(a - b for a, b in zip(n, m)))
            if dmn < need:
                c1.append((m, n, dmn, need))
    c2 = []
    for m in smalls:
        sd_m = data.safedist_level(levels[m])
        if sd_m <= 1:
            continue
        for delta in kernel.ball(sd_m - 1):
            if not any(delta):
                continue
            n = tuple(a + b for a, b in zip(m, delta))
            if n not in levels:  # outside the declared box
                continue
            if data.level(delta) != levels[n]:
                c2.append((m, n, data.level(delta), levels[n]))
    return smalls, c1, c2


def verify_consistency(data, box, kernel=None, bisect=True):
    """Check (c0)-(c2) on the box; violations are reported, never raised."""
    kernel = kernel if kernel is not None else laplacian_kernel(data.dimension)
    smalls, c1, c2 = _check_axioms(data, box, kernel)
    largest = None
    if bisect:
        def passes(beta):
            try:
                trial = DenominatorData(beta=beta, c_safe=data.c_safe,
                                        frequency=data.frequency)
            except ValueError:
                return False
            _, v1, v2 = _check_axioms(trial, box, kernel)
            return not v1 and not v2

        lo = None
        hi = 0.5
        b = 0.45
        while b > 1e-4:
            if passes(b):
                lo = b
                break
            hi = b
            b *= 0.7
        if lo is not None:
            for _ in range(20):
                mid = 0.5 * (lo + hi)
                if passes(mid):
                    lo = mid
                else:
                    hi = mid
            largest = lo
    return ConsistencyReport(
        passed=not c1 and not c2,
        beta=data.beta,
        c_safe=data.c_safe,
        box=box,
        n_small=len(smalls),
        c1_violations=c1,
        c2_violations=c2,
        largest_beta=largest,
    )


# ---------------------------------------------------------------------------
# canonical marking


def _mark_spans_for_segment(seg, data):
    """Staged level-ascending marking of one excursion; returns mark spans."""
    coords = seg.coords
    n = len(coords)
    if n < 2:
        return ()
    orders = seg.step_orders
    levels = [data.level(c) for c in coords]
    finite = [lv for lv in levels if lv >= 1 and lv != math.inf]
    if not finite:
        return ()
    spans = []

    def dead_coord(i):
        return any(s <= i <= e for s, e in spans)

    def dead_edge(k):  # edge k joins coords[k], coords[k+1]
        return any(s - 1 <= k <= e for s, e in spans)

    def steps_between(i, j):
        return sum(orders[k] for k in range(i, j) if not dead_edge(k))

    for stage in range(1, max(finite) + 1):
        sd = data.safedist_level(stage)
        if sd <= 0:
            continue
        values = {coords[i] for i in range(n) if levels[i] == stage}
        for v in sorted(values):
            alive = [i for i in range(n) if coords[i] == v and not dead_coord(i)]
            # merge indices joined by fully collapsed gaps: they are one visit
            groups = []
            for i in alive:
                if groups and steps_between(groups[-1][-1], i) == 0:
                    groups[-1].append(i)
                else:
                    groups.append([i])
            new = []
            for g1, g2 in zip(groups, groups[1:]):
                dist = steps_between(g1[-1], g2[0])
                if 0 < dist < sd:
                    new.append((g1[-1] + 1, g2[0] - 1))
            spans.extend(new)
    return tuple(sorted(spans, key=lambda se: (se[0], -se[1])))


def canonical_marking(path, data):
    """Mark every short return segment, staged from level 1 upward.

    Marking is applied to each loop of the path independently (excursions to
    higher sheets neither count as steps nor participate in the loop's own
    visit log).  A safe loop is returned unchanged.
    """
    def walk(seg):
        return Segment(
            coords=seg.coords,
            entry_order=seg.entry_order,
            step_orders=seg.step_orders,
            exit_order=seg.exit_order,
            children=tuple((a, walk(ch)) for a, ch in seg.children),
            marks=_mark_spans_for_segment(seg, data),
        )
    base = path.strip_marks() if path.has_marks() else path
    return PathString(kind=path.kind, root=walk(base.root), dimension=path.dimension)


def is_safe_loop(seg, data):
    return not _mark_spans_for_segment(seg, data)


# ---------------------------------------------------------------------------
# canonical translation


def _translate_segment(seg, data, check_levels):
    """Rewrite marked spans of one excursion as translated ascents."""
    children = list(seg.children)
    spans = list(seg.marks)

    def build(lo, hi, entry_order, exit_order, delta):
        # spans fully inside (lo, hi]; the region-defining span itself has s == lo
        top = []
        for s, e in sorted(spans, key=lambda se: (se[0], -se[1])):
            if lo < s and e <= hi and not any(ts <= s and e <= te and (ts, te) != (s, e)
                                              for ts, te in spans
                                              if lo < ts and te <= hi):
                top.append((s, e))
        top.sort()
        out_coords = []
        out_steps = []
        out_children = []
        incoming = entry_order

        def translated(c):
            if delta is None:
                return c
            nc = tuple(a + b for a, b in zip(c, delta))
            if not any(nc):
                raise LevelShift(f"coordinate {c} translated into the origin")
            if check_levels and data is not None:
                if data.level(nc) != data.level(c):
                    raise LevelShift(
                        f"level of {c} changed from {data.level(c)} to {data.level(nc)} "
                        f"under translation by {delta}")
            return nc

        def emit(c, edge_order):
            nonlocal incoming
            if out_coords:
                out_steps.append(edge_order)
            else:
                incoming = edge_order
            out_coords.append(translated(c))

        def attach_children_of(i):
            for a, ch in children:
                if a == i:
                    out_children.append((len(out_coords) - 1, _translate_segment(ch, data, check_levels)))

        i = lo
        edge_in = entry_order
        span_idx = {s: (s, e) for s, e in top}
        while i <= hi:
            if i in span_idx:
                s, e = span_idx[i]
                m = seg.coords[s - 1]
                child_entry = seg.step_orders[s - 1]
                child_exit = seg.step_orders[e]
                child = build(s, e, child_entry, child_exit, tuple(-x for x in m))
                out_children.append((len(out_coords) - 1, child))
                # second flank merges into the anchor visit
                attach_children_of(e + 1)
                if e + 1 < hi:
                    edge_in = seg.step_orders[e + 1]
                i = e + 2
            else:
                emit(seg.coords[i], edge_in)
                attach_children_of(i)
                if i < hi:
                    edge_in = seg.step_orders[i]
                i += 1
        return Segment(coords=tuple(out_coords), entry_order=incoming,
                       step_orders=tuple(out_steps), exit_order=exit_order,
                       children=tuple(out_children))

    if not spans:
        return Segment(coords=seg.coords, entry_order=seg.entry_order,
                       step_orders=seg.step_orders, exit_order=seg.exit_order,
                       children=tuple((a, _translate_segment(ch, data, check_levels))
                                      for a, ch in seg.children))
    return build(0, len(seg.coords) - 1, seg.entry_order, seg.exit_order, None)


def translate_marked(path, data=None, check_levels=True):
    """Turn mark spans into ascents translated by minus their anchor."""
    root = _translate_segment(path.root, data, check_levels and data is not None)
    return PathString(kind=path.kind, root=root, dimension=path.dimension)


def canonical_translation(path, data):
    """T(path): canonical marking followed by translation.

    A path that already carries marks is translated as given (the caller
    vouches that they are the canonical ones); unmarked paths are marked
    first.  T is idempotent and fixes safe loops.
    """
    if path.has_marks():
        return translate_marked(path, data)
    return translate_marked(canonical_marking(path, data), data)


def is_canonical(path, data):
    if path.has_marks():
        return False
    return canonical_translation(path, data) == path


# ---------------------------------------------------------------------------
# translational equivalence classes


def _is_short(child, anchor_coord, data):
    return child.own_length < data.safedist(anchor_coord)


def _segment_variants(seg, data):
    """All toggle variants of the subtree rooted at seg (seg itself fixed)."""
    per_child = []
    for a, ch in seg.children:
        anchor_val = seg.coords[a]
        subs = _segment_variants(ch, data)
        opts = [("asc", v) for v in subs]
        if _is_short(ch, anchor_val, data):
            opts.extend(("flat", v) for v in subs)
        per_child.append((a, opts))
    out = []
    for combo in _iproduct(*[opts for _, opts in per_child]):
        out_coords = []
        out_steps = []
        out_children = []
        incoming = seg.entry_order
        choice_at = {}
        for (a, _), ch_choice in zip(per_child, combo):
            choice_at.setdefault(a, []).append(ch_choice)

        def emit(c, order):
            nonlocal incoming
            if out_coords:
                out_steps.append(order)
            else:
                incoming = order
            out_coords.append(c)

        for i, c in enumerate(seg.coords):
            emit(c, seg.entry_order if i == 0 else seg.step_orders[i - 1])
            for mode, variant in choice_at.get(i, []):
                if mode == "asc":
                    out_children.append((len(out_coords) - 1, variant))
                else:
                    # splice the loop back in place, translated by the anchor
                    for k, vc in enumerate(variant.coords):
                        order = variant.entry_order if k == 0 else variant.step_orders[k - 1]
                        emit(tuple(x + y for x, y in zip(vc, c)), order)
                        base_pos = len(out_coords) - 1
                        for ga, gch in variant.children:
                            if ga == k:
                                out_children.append((base_pos, gch))
                    emit(c, variant.exit_order)
        out.append(Segment(coords=tuple(out_coords), entry_order=incoming,
                           step_orders=tuple(out_steps), exit_order=seg.exit_order,
                           children=tuple(out_children)))
    return out


def equivalence_class(path, data):
    """All 2^s members of [path], s the number of short loops of T(path)."""
    can = canonical_translation(path, data)
    members = [PathString(kind=path.kind, root=seg, dimension=path.dimension)
               for seg in _segment_variants(can.root, data)]
    members.sort(key=print_path)
    return members


def count_short_loops(path, data):
    total = [0]

    def walk(seg):
        for a, ch in seg.children:
            if _is_short(ch, seg.coords[a], data):
                total[0] += 1
            walk(ch)
    walk(path.root)
    return total[0]


# ---------------------------------------------------------------------------
# grouped contributions


def _bare_path(seg, kind, dimension):
    bare = Segment(coords=seg.coords, entry_order=seg.entry_order,
                   step_orders=seg.step_orders,
                   exit_order=seg.exit_order if kind == "eigenvalue" else None,
                   children=())
    return PathString(kind=kind, root=bare, dimension=dimension)


def _cont_class_rec(seg, kind, ctx, data, s, t_global):
    """Grouped contribution of seg's subtree, telescoping form (exact).

    `s` is the shift at which this segment's own coordinates are evaluated
    (the global t plus the anchors of every enclosing flattened segment);
    short children contribute (F(sub, s + a.omega) - F(sub, t)) / (V_0 -
    V_a(s)), non-short ones keep the plain descending factor -F(sub, t) /
    (V_0 - V_a(s)).  Ascended frames always restart at the *global* shift:
    a nested ascent keeps its local denominators wherever its parent sits,
    which is what the explicit member sum evaluates to.
    """
    inst = ctx.instance
    d = inst.dimension
    hp = ctx.high_precision
    sub_ctx = PathWeightContext(instance=inst, t=s, precision=ctx.precision)
    total = cont(_bare_path(seg, kind, d), sub_ctx)
    for a, ch in seg.children:
        anchor = seg.coords[a]
        if hp:
            gap = inst.v_mp(origin(d)) - inst.v_mp(anchor, s)
        else:
            gap = inst.v(origin(d)) - inst.v(anchor, s)
        if abs(gap) < inst.delta_res:
            raise ResonantSite(anchor, float(abs(gap)))
        asc = _cont_class_rec(ch, "eigenvalue", ctx, data, t_global, t_global)
        if _is_short(ch, anchor, data):
            if hp:
                shift = s + mpmath.fsum(c * mpmath.mpf(w)
                                        for c, w in zip(anchor, inst.frequency.omega))
            else:
                shift = s + inst.frequency.dot(anchor)
            flat = _cont_class_rec(ch, "eigenvalue", ctx, data, shift, t_global)
            total *= (flat - asc) / gap
        else:
            total *= -asc / gap
    return total


def cont_class(path, ctx, data, method="sum"):
    """Sum of Cont over the translational equivalence class of the path.

    method="sum" adds the members explicitly; method="telescope" uses the
    factorized form, which realizes the cancellations numerically.  The two
    routes agree up to roundoff.
    """
    if method == "telescope":
        can = canonical_translation(path, data)
        if ctx.high_precision:
            with mpmath.workdps(ctx.dps):
                t0 = mpmath.mpf(ctx.t)
                return _cont_class_rec(can.root, can.kind, ctx, data, t0, t0)
        return _cont_class_rec(can.root, can.kind, ctx, data, ctx.t, ctx.t)
    if method != "sum":
        raise ValueError(f"unknown method {method!r}")
    members = equivalence_class(path, data)
    if ctx.high_precision:
        with mpmath.workdps(ctx.dps):
            return mpmath.fsum(cont(m, ctx) for m in members)
    return math.fsum(cont(m, ctx) for m in members) if not ctx.instance.hopping.is_complex \
        else sum(cont(m, ctx) for m in members)


# ---------------------------------------------------------------------------
# loop stacks


@dataclass(frozen=True)
class LoopStack:
    """A maximal stack: base loop plus its tree of short attached loops."""

    path: PathString           # the stack as a standalone path
    anchor: tuple | None       # coordinate it attaches to (parent's local frame)
    parent: int | None         # index of the parent stack
    parent_address: tuple      # segment address of the anchor within the parent stack
    anchor_index: int | None   # coordinate index of the anchor visit
    child_slot: int | None     # position among the anchor segment's children


def decompose_stacks(path, data):
    """Greedy maximal-stack decomposition of a translation-canonical path."""
    if path.has_marks() or not is_canonical(path, data):
        raise NotCanonical("decompose_stacks needs a path with T(P) = P")
    stacks = []

    def harvest(seg, stack_index, addr):
        """Prune seg to its short-chain subtree; spawn stacks for the rest."""
        kept = []
        slot = 0
        for a, ch in seg.children:
            anchor_val = seg.coords[a]
            if _is_short(ch, anchor_val, data):
                kept.append((a, harvest(ch, stack_index, addr + (slot,))))
                slot += 1
            else:
                spawn_index = len(stacks)
                stacks.append(None)  # reserve position, fill below
                pruned = harvest(ch, spawn_index, ())
                stacks[spawn_index] = LoopStack(
                    path=PathString(kind="eigenvalue", root=pruned, dimension=path.dimension),
                    anchor=anchor_val,
                    parent=stack_index,
                    parent_address=addr,
                    anchor_index=a,
                    child_slot=len(kept),
                )
        return Segment(coords=seg.coords, entry_order=seg.entry_order,
                       step_orders=seg.step_orders, exit_order=seg.exit_order,
                       children=tuple(kept))

    stacks.append(None)
    root = harvest(path.root, 0, ())
    stacks[0] = LoopStack(path=PathString(kind=path.kind, root=root, dimension=path.dimension),
                          anchor=None, parent=None, parent_address=(),
                          anchor_index=None, child_slot=None)
    anchors = [s.anchor for s in stacks[1:]]
    return stacks, anchors


def compose_stacks(stacks):
    """Inverse of decompose_stacks (exact reconstruction)."""
    roots = [s.path.root for s in stacks]
    order = sorted(range(1, len(stacks)),
                   key=lambda i: (stacks[i].parent, stacks[i].parent_address, stacks[i].child_slot),
                   reverse=True)
    for i in order:
        s = stacks[i]
        parent_root = roots[s.parent]

        def insert(seg, addr):
            if not addr:
                kids = list(seg.children)
                kids.insert(s.child_slot, (s.anchor_index, roots[i]))
                return Segment(coords=seg.coords, entry_order=seg.entry_order,
                               step_orders=seg.step_orders, exit_order=seg.exit_order,
                               children=tuple(kids))
            k = addr[0]
            kids = list(seg.children)
            a, ch = kids[k]
            kids[k] = (a, insert(ch, addr[1:]))
            return Segment(coords=seg.coords, entry_order=seg.entry_order,
                           step_orders=seg.step_orders, exit_order=seg.exit_order,
                           children=tuple(kids))

        roots[s.parent] = insert(parent_root, s.parent_address)
    base = stacks[0]
    return PathString(kind=base.path.kind, root=roots[0], dimension=base.path.dimension)


def cont_class_stacked(path, ctx, data):
    """Cont([P]) via the maximal-stack factorization.

    Exact whenever every non-base stack attaches to a vertex of a non-toggled
    loop (in particular whenever the whole path is a single stack).
    """
    stacks, _ = decompose_stacks(path, data)
    inst = ctx.instance
    d = inst.dimension
    total = cont_class(stacks[0].path, ctx, data, method="telescope")
    for s in stacks[1:]:
        gap = inst.v(s.anchor, ctx.t) - inst.v(origin(d))
        total *= cont_class(s.path, ctx, data, method="telescope") / gap
    return total


# ---------------------------------------------------------------------------
# stack statistics and bounds


@dataclass(frozen=True)
class StackStats:
    """Denominator/loop counters of a path at a level cutoff m."""

    cutoff: float
    den: int
    totallevel: int
    loops: int
    nbloops: int
    nblevel: int
    downedges: int
    singden: int
    singdownedges: int
    height: int
    maxlevel: int


def stack_stats(path, data, cutoff=0, singular=None):
    """Count denominators, loops and descending edges per the cutoff.

    ``singular`` is an optional site predicate (local coordinate -> bool)
    marking singular small denominators; descending-edge arrivals are never
    counted in `den`/`singden`.
    """
    if isinstance(path, LoopStack):
        path = path.path
    den = totallevel = downedges = singden = singdown = 0
    for kind, order, src, dst, anchor, depth in iter_edges(path):
        if kind in ("start", "step", "ascend"):
            lv = data.level(dst)
            if lv != math.inf and lv >= cutoff:
                den += 1
                totallevel += lv
            if singular is not None and singular(dst):
                singden += 1
        elif kind == "descend":
            lv = data.level(anchor)
            if lv != math.inf and lv >= cutoff:
                downedges += 1
            if singular is not None and singular(anchor):
                singdown += 1
    loops = nbloops = nblevel = 0
    maxlev = 0
    height = 0
    for addr, seg in path.segments():
        height = max(height, len(addr))
        finite = [data.level(c) for c in seg.coords]
        finite = [lv for lv in finite if lv != math.inf]
        top = max(finite) if finite else 0
        maxlev = max(maxlev, top)
        if top >= cutoff:
            loops += 1
            if addr != ():
                nbloops += 1
                nblevel += top
    return StackStats(cutoff=cutoff, den=den, totallevel=totallevel, loops=loops,
                      nbloops=nbloops, nblevel=nblevel, downedges=downedges,
                      singden=singden, singdownedges=singdown,
                      height=height, maxlevel=maxlev)


def m_beta(data, d_min):
    """Cutoff level below which denominators cannot be small: beta^(M+1) = 4/D_min."""
    return math.log(4.0 / d_min) / math.log(data.beta) - 1.0


@dataclass
class StackBoundReport:
    length: int
    lhs: float
    rhs: float
    ratio: float
    lipschitz_fd: float
    lipschitz_bound: float
    lipschitz_ratio: float
    stats: StackStats
    m_cutoff: float
    passed: bool


def check_stack_bound(path, ctx, data, c_reg, d_min, c_dist, fd_factor=1e-6):
    """Evaluate |Cont([P], t)| against the loop-stack bound, and its t-Lipschitz form.

    The right-hand side is
        (c_dist ||phi||)^|P| (4/D)^den beta^(-totallevel-den)
        * C_reg^downedges (4/D)^nbloops beta^(-nblevel-nbloops)
    with all counters taken at cutoff M_beta.  The Lipschitz check compares a
    central difference of Cont([P], .) with C_reg max(4 beta^(-level(L)-1), D) rhs.
    """
    if isinstance(path, LoopStack):
        path = path.path
    inst = ctx.instance
    base = path.root
    t_allow = 0.25 * min(inst.frequency.torus_norm_at(c) for c in base.coords)
    if abs(ctx.t) > t_allow:
        raise PreconditionViolated(
            f"|t| = {abs(ctx.t):.3e} exceeds (1/4) min ||n.omega|| = {t_allow:.3e}")
    cut = m_beta(data, d_min)
    st = stack_stats(path, data, cutoff=max(cut, 0.0))
    phi_inf = inst.hopping.norm_inf
    k = path.length
    rhs = ((c_dist * phi_inf) ** k
           * (4.0 / d_min) ** st.den
           * data.beta ** (-(st.totallevel + st.den))
           * c_reg ** st.downedges
           * (4.0 / d_min) ** st.nbloops
           * data.beta ** (-(st.nblevel + st.nbloops)))
    lhs = abs(cont_class(path, ctx, data, method="telescope"))

    h = fd_factor * t_allow
    up = cont_class(path, PathWeightContext(inst, t=ctx.t + h, precision=ctx.precision),
                    data, method="telescope")
    dn = cont_class(path, PathWeightContext(inst, t=ctx.t - h, precision=ctx.precision),
                    data, method="telescope")
    fd = abs(up - dn) / (2.0 * h)
    base_levels = [data.level(c) for c in base.coords]
    base_levels = [lv for lv in base_levels if lv != math.inf]
    lev_l = max(base_levels) if base_levels else 0
    lip_bound = c_reg * max(4.0 * data.beta ** (-(lev_l + 1)), d_min) * rhs
    return StackBoundReport(
        length=k, lhs=lhs, rhs=rhs, ratio=lhs / rhs if rhs > 0 else math.inf,
        lipschitz_fd=fd, lipschitz_bound=lip_bound,
        lipschitz_ratio=fd / lip_bound if lip_bound > 0 else math.inf,
        stats=st, m_cutoff=cut,
        passed=(lhs <= rhs) and (fd <= 2.0 * lip_bound),
    )


# ---------------------------------------------------------------------------
# random loop stacks


def _closed_loops(moves, dimension, length):
    """Single-sheet eigenvalue loops (no ascents) of exact length."""
    from .paths import _menu_distance

    zero = origin(dimension)
    out = []
    dist = _menu_distance(moves, dimension, length + max(j for j, _ in moves))

    def dfs(coords, steps, entry, rem):
        cur = coords[-1]
        if dist.get(cur, math.inf) > rem:
            return
        for j, off in moves:
            tgt = tuple(a + b for a, b in zip(cur, off))
            if tgt == zero:
                if rem == j:
                    out.append(Segment(coords=tuple(coords), entry_order=entry,
                                       step_orders=tuple(steps), exit_order=j))
                continue
            if rem - j >= 1:
                coords.append(tgt)
                steps.append(j)
                dfs(coords, steps, entry, rem - j)
                coords.pop()
                steps.pop()

    for j, off in moves:
        if length - j >= 1:
            dfs([off], [], j, length - j)
    return out


def sample_loop_stacks(instance, data, count, max_base=14, max_attach=3, rng=None):
    """Random eigenvalue loop stacks: a safe base loop with short loops attached
    at its small denominators (recursively, depth-limited)."""
    rng = rng if rng is not None else random.Random(20240317)
    from .paths import _move_menu
    moves = _move_menu(instance)
    d = instance.dimension
    pool = []
    for L in range(2, max_base + 1):
        for seg in _closed_loops(moves, d, L):
            if is_safe_loop(seg, data):
                pool.append(seg)
    if not pool:
        return []
    short_pool = {}

    def shorts_for(anchor):
        sd = data.safedist(anchor)
        if sd in short_pool:
            return short_pool[sd]
        loops = []
        for L in range(2, int(min(sd - 1, max_base)) + 1 if sd != math.inf else 0):
            for seg in _closed_loops(moves, d, L):
                if seg.total_length() < sd and is_safe_loop(seg, data):
                    loops.append(seg)
        short_pool[sd] = loops
        return loops

    def decorate(seg, depth):
        kids = []
        for i, c in enumerate(seg.coords):
            lv = data.level(c)
            if lv == math.inf or lv < 1 or depth >= max_attach:
                continue
            opts = shorts_for(c)
            if not opts:
                continue
            for _ in range(rng.choice((0, 0, 1, 1, 2))):
                kids.append((i, decorate(rng.choice(opts), depth + 1)))
        kids.sort(key=lambda p: p[0])
        return Segment(coords=seg.coords, entry_order=seg.entry_order,
                       step_orders=seg.step_orders, exit_order=seg.exit_order,
                       children=tuple(kids))

    out = []
    for _ in range(count):
        base = rng.choice(pool)
        out.append(PathString(kind="eigenvalue", root=decorate(base, 0), dimension=d))
    return out


# ---------------------------------------------------------------------------
# series via grouped class sums


def compute_series_class_sum(instance, order, data):
    """lambda_s and psi_s as sums of grouped class contributions."""
    zero = origin(instance.dimension)
    ctx = PathWeightContext(instance=instance)
    lambdas = [instance.v(zero)]
    psis = [{zero: 1.0}]
    for s in range(1, order + 1):
        reps = {}
        for p in enumerate_paths(instance, "eigenvalue", s):
            key = print_path(canonical_translation(p, data))
            reps.setdefault(key, p)
        lam = 0.0
        for p in reps.values():
            lam += cont_class(p, ctx, data, method="telescope")
        vec = {}
        for k in instance.hopping.ball(s):
            if k == zero:
                continue
            reps = {}
            for p in enumerate_paths(instance, "eigenvector", s, endpoint=k):
                key = print_path(canonical_translation(p, data))
                reps.setdefault(key, p)
            tot = 0.0
            for p in reps.values():
                tot += cont_class(p, ctx, data, method="telescope")
            if tot != 0.0:
                vec[k] = tot
        lambdas.append(lam)
        psis.append(vec)
    return SeriesResult(order=order, lambdas=lambdas, psis=psis,
                        method="class_sum", instance=instance)
