"""Paths on the sheeted graph: parenthesis grammar, weights, enumeration.

A path is stored as an ordered tree of sheet excursions.  Each ``Segment``
records the coordinates visited on one sheet (in its local frame), the order
of every edge, ascents as children anchored at a visit index, and optional
marked spans (square brackets).  The sheeted graph itself is never
materialized; an ascent simply opens a fresh local frame.

String notation follows the usual convention: ascending opens ``(`` and the
anchor coordinate is restated after the matching ``)``; marked segments sit
in ``[`` ``]`` between two visits of the same coordinate.  In d = 1 with all
coordinates single digits and all edge orders 1, strings are compact
(``(12345(12321)5434321)``); otherwise coordinates are whitespace-separated,
components comma-separated for d > 1, and an edge of order j > 1 carries a
``^j`` suffix on its target (or on the closing parenthesis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import mpmath

from .errors import BadPosition, MalformedString, RangeViolation, ResonantSite
from .model import OperatorInstance, origin, site
from .series import SeriesResult


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class Segment:
    """One sheet excursion: local coordinates, edge orders, ascents, marks."""

    coords: tuple
    entry_order: int = 1
    step_orders: tuple = ()
    exit_order: int | None = 1
    children: tuple = ()  # ((anchor index, Segment), ...) in temporal order
    marks: tuple = ()     # ((start, end) inclusive coordinate spans, ...)

    def __post_init__(self):
        if not self.coords:
            raise MalformedString("empty sheet excursion")
        for c in self.coords:
            if not any(c):
                raise MalformedString("a path never visits the origin in between")
        if len(self.step_orders) != len(self.coords) - 1:
            raise MalformedString("step order table does not match coordinate count")
        if self.entry_order < 1 or any(j < 1 for j in self.step_orders):
            raise MalformedString("edge orders are positive integers")
        if self.exit_order is not None and self.exit_order < 1:
            raise MalformedString("edge orders are positive integers")
        last = -1
        for a, child in self.children:
            if not 0 <= a < len(self.coords):
                raise MalformedString(f"child anchored at invalid index {a}")
            if a < last:
                raise MalformedString("children must be in temporal order")
            last = a
            if child.exit_order is None:
                raise MalformedString("attached loops must close")
        spans = sorted(self.marks, key=lambda se: (se[0], -se[1]))
        for s, e in spans:
            if not (1 <= s <= e <= len(self.coords) - 2):
                raise MalformedString(f"mark span ({s},{e}) out of range")
            if self.coords[s - 1] != self.coords[e + 1]:
                raise MalformedString("marked segment must sit between two visits of one coordinate")
        for i, (s1, e1) in enumerate(spans):
            for s2, e2 in spans[i + 1:]:
                if s2 > e1:
                    continue
                if not (s1 < s2 and e2 < e1):
                    # strict nesting: shared flanks cannot arise (the staged
                    # marking merges the shared visit first)
                    raise MalformedString("overlapping marks must be strictly nested")
        object.__setattr__(self, "marks", tuple(spans))

    @property
    def own_length(self):
        """Edge-order-weighted length of this excursion's own edges."""
        total = self.entry_order + sum(self.step_orders)
        if self.exit_order is not None:
            total += self.exit_order
        return total

    def total_length(self):
        return self.own_length + sum(ch.total_length() for _, ch in self.children)

    def children_at(self, index):
        return tuple(ch for a, ch in self.children if a == index)


@dataclass(frozen=True)
class PathString:
    """Eigenvalue or eigenvector path, possibly carrying marks."""

    kind: str
    root: Segment
    dimension: int

    def __post_init__(self):
        if self.kind not in ("eigenvalue", "eigenvector"):
            raise MalformedString(f"unknown path kind {self.kind!r}")
        if self.kind == "eigenvalue" and self.root.exit_order is None:
            raise MalformedString("eigenvalue paths close with an edge to the origin")
        if self.kind == "eigenvector" and self.root.exit_order is not None:
            raise MalformedString("eigenvector paths end at their last coordinate")
        def walk(seg):
            for c in seg.coords:
                if len(c) != self.dimension:
                    raise MalformedString(f"coordinate {c} has wrong dimension")
            for _, ch in seg.children:
                walk(ch)
        walk(self.root)

    @property
    def length(self):
        """|P|: total edge-order-weighted length."""
        return self.root.total_length()

    @property
    def endpoint(self):
        return self.root.coords[-1] if self.kind == "eigenvector" else None

    def has_marks(self):
        found = [False]

        def walk(seg):
            if seg.marks:
                found[0] = True
            for _, ch in seg.children:
                walk(ch)
        walk(self.root)
        return found[0]

    def strip_marks(self):
        def walk(seg):
            return Segment(
                coords=seg.coords,
                entry_order=seg.entry_order,
                step_orders=seg.step_orders,
                exit_order=seg.exit_order,
                children=tuple((a, walk(ch)) for a, ch in seg.children),
            )
        return PathString(kind=self.kind, root=walk(self.root), dimension=self.dimension)

    def segments(self):
        """All excursions with tree addresses, root first (pre-order)."""
        out = []

        def walk(seg, addr):
            out.append((addr, seg))
            for k, (_, ch) in enumerate(seg.children):
                walk(ch, addr + (k,))
        walk(self.root, ())
        return out

    def segment_at(self, addr):
        seg = self.root
        for k in addr:
            seg = seg.children[k][1]
        return seg

    def visits(self):
        """Temporal visit sequence: (segment address, coordinate index, coordinate)."""
        out = []

        def walk(seg, addr):
            for i, c in enumerate(seg.coords):
                out.append((addr, i, c))
                for k, (a, ch) in enumerate(seg.children):
                    if a == i:
                        walk(ch, addr + (k,))
        walk(self.root, ())
        return out

    def __str__(self):
        return print_path(self)


def make_path(kind, coords, dimension=None, children=(), marks=(),
              entry_order=1, step_orders=None, exit_order=1):
    """Convenience constructor from bare coordinates (ints allowed in d=1)."""
    if dimension is None:
        first = coords[0]
        dimension = 1 if isinstance(first, int) else len(first)
    cs = tuple(site(c, dimension) for c in coords)
    steps = tuple(step_orders) if step_orders is not None else (1,) * (len(cs) - 1)
    root = Segment(coords=cs, entry_order=entry_order, step_orders=steps,
                   exit_order=None if kind == "eigenvector" else exit_order,
                   children=tuple(children), marks=tuple(marks))
    return PathString(kind=kind, root=root, dimension=dimension)


# ---------------------------------------------------------------------------
# printing


def _coord_token(c, compact):
    if compact:
        return str(c[0])
    return ",".join(str(x) for x in c)


def _is_compact(path):
    if path.dimension != 1:
        return False
    ok = [True]

    def walk(seg):
        if seg.entry_order != 1 or seg.exit_order not in (None, 1) or any(j != 1 for j in seg.step_orders):
            ok[0] = False
        for c in seg.coords:
            if abs(c[0]) > 9:
                ok[0] = False
        for _, ch in seg.children:
            walk(ch)
    walk(path.root)
    return ok[0]


def print_path(path):
    # tokens are concatenated directly in the compact digit style and joined
    # with spaces otherwise (any whitespace marks a string as separated, so a
    # lone multi-digit coordinate must not print bare)
    compact = _is_compact(path)
    tokens = []

    def emit(seg, is_root):
        starts = {}
        ends = {}
        for s, e in seg.marks:
            starts.setdefault(s, []).append((s, e))
            ends.setdefault(e, []).append((s, e))
        for i, c in enumerate(seg.coords):
            for s, e in sorted(starts.get(i, []), key=lambda se: -se[1]):
                tokens.append("[")
            order = seg.entry_order if i == 0 else seg.step_orders[i - 1]
            tokens.append(_coord_token(c, compact) + (f"^{order}" if order != 1 else ""))
            for a, ch in seg.children:
                if a == i:
                    tokens.append("(")
                    emit(ch, False)
                    tokens.append(")" + (f"^{ch.exit_order}" if ch.exit_order != 1 else ""))
                    tokens.append(_coord_token(c, compact))  # restated anchor
            for s, e in sorted(ends.get(i, []), key=lambda se: se[0], reverse=True):
                tokens.append("]")

    tokens.append("(")
    emit(path.root, True)
    closing = ")"
    if path.kind == "eigenvalue" and path.root.exit_order != 1:
        closing += f"^{path.root.exit_order}"
    tokens.append(closing)
    return "".join(tokens) if compact else " ".join(tokens)


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text):
    """Tokens: ( ) [ ] COORD(list of ints) ORDER(int).

    A string with no whitespace and no commas is read in the compact
    digit-per-coordinate style; otherwise coordinates are full signed
    integers separated by whitespace, components joined by commas for d > 1.
    """
    text = text.strip()
    toks = []
    i = 0
    n = len(text)
    compact = ("," not in text) and not any(ch.isspace() for ch in text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()[]":
            toks.append((ch, i))
            i += 1
            continue
        if ch == "^":
            j = i + 1
            num = ""
            while j < n and text[j].isdigit():
                num += text[j]
                j += 1
            if not num:
                raise MalformedString("bare ^ without an order", i)
            toks.append(("order", int(num), i))
            i = j
            continue
        if ch == "-" or ch.isdigit():
            if compact:
                sign = 1
                if ch == "-":
                    sign = -1
                    i += 1
                    if i >= n or not text[i].isdigit():
                        raise MalformedString("dangling minus sign", i)
                toks.append(("coord", [sign * int(text[i])], i))
                i += 1
            else:
                j = i
                comps = []
                while True:
                    sign = 1
                    if j < n and text[j] == "-":
                        sign = -1
                        j += 1
                    num = ""
                    while j < n and text[j].isdigit():
                        num += text[j]
                        j += 1
                    if not num:
                        raise MalformedString("malformed coordinate", j)
                    comps.append(sign * int(num))
                    if j < n and text[j] == ",":
                        j += 1
                        continue
                    break
                toks.append(("coord", comps, i))
                i = j
            continue
        raise MalformedString(f"unexpected character {ch!r}", i)
    return toks


def parse_path(text, kind="eigenvalue", dimension=None):
    """Parse the parenthesis grammar; see the module docstring.

    The same string can denote an eigenvalue or an eigenvector path, so the
    kind is supplied by the caller (default eigenvalue).
    """
    toks = _tokenize(text)
    if not toks or toks[0][0] != "(":
        raise MalformedString("path must start with '('", 0)
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def take():
        t = peek()
        if t is None:
            raise MalformedString("unexpected end of string")
        pos[0] += 1
        return t

    dim = [dimension]

    def coord_of(tok):
        comps = tuple(tok[1])
        if dim[0] is None:
            dim[0] = len(comps)
        if len(comps) != dim[0]:
            raise MalformedString(f"coordinate {comps} has mixed dimension", tok[-1])
        return comps

    def opt_order():
        t = peek()
        if t is not None and t[0] == "order":
            take()
            return t[1]
        return 1

    def parse_segment(is_root):
        # consumes tokens after '(' up to and including the matching ')'
        coords = []
        steps = []
        children = []
        marks = []
        open_marks = []
        entry_order = [1]

        def expect_restatement(anchor):
            t = take()
            if t[0] != "coord" or coord_of(t) != anchor:
                raise MalformedString("ascent must be followed by its restated anchor", t[-1])

        while True:
            t = take()
            if t[0] == "coord":
                c = coord_of(t)
                j = opt_order()
                if not coords:
                    entry_order[0] = j
                else:
                    steps.append(j)
                coords.append(c)
            elif t[0] == "(":
                if not coords:
                    raise MalformedString("ascent with no anchor", t[-1])
                child, child_exit = parse_segment(False)
                child = Segment(coords=child.coords, entry_order=child.entry_order,
                                step_orders=child.step_orders, exit_order=child_exit,
                                children=child.children, marks=child.marks)
                children.append((len(coords) - 1, child))
                expect_restatement(coords[-1])
            elif t[0] == "[":
                if not coords:
                    raise MalformedString("mark with no left flank", t[-1])
                open_marks.append(len(coords))
            elif t[0] == "]":
                if not open_marks:
                    raise MalformedString("unmatched ']'", t[-1])
                s = open_marks.pop()
                if len(coords) <= s:
                    raise MalformedString("empty mark", t[-1])
                marks.append((s, len(coords) - 1))
            elif t[0] == ")":
                if open_marks:
                    raise MalformedString("mark not closed before ')'", t[-1])
                if not coords:
                    raise MalformedString("empty parentheses", t[-1])
                exit_order = opt_order()
                seg = Segment(coords=tuple(coords), entry_order=entry_order[0],
                              step_orders=tuple(steps), exit_order=exit_order,
                              children=tuple(children), marks=tuple(marks))
                return seg, exit_order
            else:
                raise MalformedString(f"unexpected token {t[0]!r}", t[-1])

    take()  # outer '('
    seg, exit_order = parse_segment(True)
    if pos[0] != len(toks):
        raise MalformedString("trailing input after path", toks[pos[0]][-1])
    if kind == "eigenvector":
        seg = Segment(coords=seg.coords, entry_order=seg.entry_order,
                      step_orders=seg.step_orders, exit_order=None,
                      children=seg.children, marks=seg.marks)
    d = dim[0] if dim[0] is not None else 1
    return PathString(kind=kind, root=seg, dimension=d)


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class PathWeightContext:
    """Weight evaluation context: operator instance, loop shift t, precision."""

    instance: OperatorInstance
    t: float = 0.0
    precision: object = "double"  # "double" or decimal digits for mpmath

    @property
    def high_precision(self):
        return self.precision != "double"

    @property
    def dps(self):
        return int(self.precision) if self.high_precision else None


class _Values:
    """Potential/hopping accessor honoring the context's precision."""

    def __init__(self, ctx, t_override=None):
        self.inst = ctx.instance
        self.hp = ctx.high_precision
        self.t = t_override if t_override is not None else ctx.t
        self.delta_res = ctx.instance.delta_res
        if self.hp and not self.inst.hopping.constant_flag:
            raise ValueError("high-precision weights require a constant hopping kernel")

    def gap(self, n):
        """V_0 - V_n(t), resonance-checked."""
        if self.hp:
            g = self.inst.v_mp((0,) * self.inst.dimension) - self.inst.v_mp(n, self.t)
            if abs(g) < self.delta_res:
                raise ResonantSite(n, float(abs(g)))
            return g
        g = self.inst.v((0,) * self.inst.dimension) - self.inst.v(n, self.t)
        if abs(g) < self.delta_res:
            raise ResonantSite(n, abs(g))
        return g

    def amp(self, j, m, n):
        """Phi^j_{mn}(x0 + t), with an explicit range check."""
        kern = self.inst.hopping
        off = tuple(a - b for a, b in zip(m, n))
        if max(abs(c) for c in off) > j * kern.base_range:
            raise RangeViolation(f"jump {off} exceeds range {j * kern.base_range} of order {j}")
        if self.hp:
            return mpmath.mpmathify(kern.amplitude(j, off))
        return self.inst.phi(j, m, n, self.t)


def iter_edges(path):
    """All edges in temporal order as (kind, order, src, dst, anchor, depth).

    Descending edges of ascents are emitted by the parent at the anchor; the
    root's closing edge (eigenvalue kind) targets the origin.
    """
    zero = origin(path.dimension)
    out = []

    def walk(seg, depth, is_root):
        out.append(("start" if is_root else "ascend", seg.entry_order, zero, seg.coords[0], None, depth))
        for i, c in enumerate(seg.coords):
            if i > 0:
                out.append(("step", seg.step_orders[i - 1], seg.coords[i - 1], c, None, depth))
            for a, ch in seg.children:
                if a == i:
                    walk(ch, depth + 1, False)
                    out.append(("descend", ch.exit_order, ch.coords[-1], c, c, depth))
        if is_root and seg.exit_order is not None:
            out.append(("close", seg.exit_order, seg.coords[-1], zero, None, depth))

    walk(path.root, 0, True)
    return out


def cont(path, ctx):
    """Product of edge weights of the path under the given context."""
    vals = _Values(ctx)
    hp = ctx.high_precision
    one = mpmath.mpf(1) if hp else 1.0
    total = one

    def weight(kind, order, src, dst, anchor):
        if kind in ("start", "ascend"):
            return vals.amp(order, dst, (0,) * path.dimension) / vals.gap(dst)
        if kind == "step":
            return vals.amp(order, dst, src) / vals.gap(dst)
        if kind == "descend":
            return -vals.amp(order, (0,) * path.dimension, src) / vals.gap(anchor)
        if kind == "close":
            return vals.amp(order, (0,) * path.dimension, src)
        raise AssertionError(kind)

    if hp:
        with mpmath.workdps(ctx.dps):
            for kind, order, src, dst, anchor, _ in iter_edges(path):
                total = total * weight(kind, order, src, dst, anchor)
            return total
    for kind, order, src, dst, anchor, _ in iter_edges(path):
        total = total * weight(kind, order, src, dst, anchor)
        if total == 0.0:
            return 0.0
    return total


# ---------------------------------------------------------------------------
# enumeration


def _move_menu(instance):
    """(order, offset) menu: kernel table, or full range balls when x-dependent."""
    kern = instance.hopping
    moves = []
    for j in kern.orders:
        if kern.constant_flag:
            offs = kern.offsets(j)
        else:
            r = j * kern.base_range
            offs = [off for off in _sup_ball(instance.dimension, r) if any(off)]
        for off in sorted(offs):
            moves.append((j, off))
    return moves


def _sup_ball(dimension, radius):
    from itertools import product as _product
    return list(_product(range(-radius, radius + 1), repeat=dimension))


def _menu_distance(moves, dimension, cap):
    """Cost-to-origin table for all sites reachable within cost cap."""
    dist = {origin(dimension): 0}
    heap = [(0, origin(dimension))]
    while heap:
        c, cur = heappop(heap)
        if c > dist.get(cur, math.inf):
            continue
        for j, off in moves:
            nxt = tuple(a + b for a, b in zip(cur, off))
            nc = c + j
            if nc <= cap and nc < dist.get(nxt, math.inf):
                dist[nxt] = nc
                heappush(heap, (nc, nxt))
    return dist


def enumerate_paths(instance, kind, length, endpoint=None):
    """All paths of exact edge-order-weighted length, each exactly once.

    Deterministic output: sorted lexicographically by printed string.
    """
    if length < 1:
        return iter(())
    d = instance.dimension
    zero = origin(d)
    if kind == "eigenvector":
        if endpoint is None:
            raise ValueError("eigenvector enumeration needs an endpoint")
        endpoint = site(endpoint, d)
        if endpoint == zero:
            raise ValueError("eigenvector endpoint must differ from the origin")
    elif endpoint is not None:
        raise ValueError("eigenvalue paths take no endpoint")

    moves = _move_menu(instance)
    if not moves:
        return iter(())
    dist = _menu_distance(moves, d, length + max(j for j, _ in moves))
    min_child = 2 * min(j for j, _ in moves)

    results = []

    def home_cost(c):
        return dist.get(c, math.inf)

    def finish_cost(c, closing):
        if closing:
            return home_cost(c)
        return dist.get(tuple(a - b for a, b in zip(c, endpoint)), math.inf)

    def gen_segment(budget, closing, is_root, sink):
        """Excursions with exactly `budget`; calls sink(segment)."""
        for j, off in moves:
            if not any(off):
                continue
            rem = budget - j
            if rem < 0:
                continue
            first = off
            extend([first], [], [], j, rem, closing, is_root, sink)

    def extend(coords, steps, children, entry_order, rem, closing, is_root, sink):
        cur = coords[-1]
        # option: finish here
        if closing:
            for j, off in moves:
                if tuple(-c for c in cur) == off and rem == j:
                    sink(Segment(coords=tuple(coords), entry_order=entry_order,
                                 step_orders=tuple(steps), exit_order=j,
                                 children=tuple(children)))
        else:
            if rem == 0 and cur == endpoint:
                sink(Segment(coords=tuple(coords), entry_order=entry_order,
                             step_orders=tuple(steps), exit_order=None,
                             children=tuple(children)))
        need = finish_cost(cur, closing)
        if need > rem:
            return
        # option: attach one more child here, then continue
        if rem - need >= min_child:
            for cb in range(min_child, rem - need + 1):
                def on_child(chseg, _cb=cb):
                    extend(coords, steps, children + [(len(coords) - 1, chseg)],
                           entry_order, rem - _cb, closing, is_root, sink)
                gen_segment(cb, True, False, on_child)
        # option: step to a new coordinate
        for j, off in moves:
            nxt = tuple(a + b for a, b in zip(cur, off))
            if nxt == zero:
                continue
            nrem = rem - j
            if nrem < 0 or finish_cost(nxt, closing) > nrem:
                continue
            coords.append(nxt)
            steps.append(j)
            extend(coords, steps, children, entry_order, nrem, closing, is_root, sink)
            coords.pop()
            steps.pop()

    def on_root(seg):
        results.append(PathString(kind=kind, root=seg, dimension=d))

    gen_segment(length, kind == "eigenvalue", True, on_root)
    results.sort(key=print_path)
    return iter(results)


# ---------------------------------------------------------------------------
# attachment


def attach(base, loop, position, child_slot=None):
    """Attach an eigenvalue loop at the visit with the given temporal index.

    `position` indexes the temporal visit sequence of `base` (see
    PathString.visits).  When the visit already carries ascents, the new one
    is appended after them unless `child_slot` gives an explicit slot.
    """
    if loop.kind != "eigenvalue":
        raise BadPosition("only eigenvalue paths can be attached")
    if loop.dimension != base.dimension:
        raise BadPosition("dimension mismatch")
    vis = base.visits()
    if not 0 <= position < len(vis):
        raise BadPosition(f"visit index {position} out of range (0..{len(vis) - 1})")
    addr, idx, _ = vis[position]

    def rebuild(seg, a):
        if not a:
            kids = [(anc, ch) for anc, ch in seg.children]
            slot = len([1 for anc, _ in kids if anc <= idx]) if child_slot is None else child_slot
            kids.insert(slot, (idx, loop.root))
            kids.sort(key=lambda p: p[0])  # stable: keeps same-anchor order
            return Segment(coords=seg.coords, entry_order=seg.entry_order,
                           step_orders=seg.step_orders, exit_order=seg.exit_order,
                           children=tuple(kids), marks=seg.marks)
        k = a[0]
        kids = list(seg.children)
        anc, ch = kids[k]
        kids[k] = (anc, rebuild(ch, a[1:]))
        return Segment(coords=seg.coords, entry_order=seg.entry_order,
                       step_orders=seg.step_orders, exit_order=seg.exit_order,
                       children=tuple(kids), marks=seg.marks)

    return PathString(kind=base.kind, root=rebuild(base.root, addr), dimension=base.dimension)


# ---------------------------------------------------------------------------
# series via explicit path sums


def compute_series_path_sum(instance, order):
    """Coefficients assembled term by term: sums of path weights per order."""
    zero = origin(instance.dimension)
    ctx = PathWeightContext(instance=instance)
    lambdas = [instance.v(zero)]
    psis = [{zero: 1.0}]
    for s in range(1, order + 1):
        lam = 0.0
        for p in enumerate_paths(instance, "eigenvalue", s):
            lam += cont(p, ctx)
        vec = {}
        for k in instance.hopping.ball(s):
            if k == zero:
                continue
            tot = 0.0
            for p in enumerate_paths(instance, "eigenvector", s, endpoint=k):
                tot += cont(p, ctx)
            if tot != 0.0:
                vec[k] = tot
        lambdas.append(lam)
        psis.append(vec)
    return SeriesResult(order=order, lambdas=lambdas, psis=psis,
                        method="path_sum", instance=instance)
