"""Potentials, frequency vectors, hopping kernels, operator instances.

Conventions used throughout the package:

* lattice sites are ``tuple[int, ...]`` of length d (plain ints are accepted
  by public entry points when d = 1);
* the potential is sampled along the orbit x0 + n . omega and is 1-periodic;
  arguments are reduced to the centered fundamental domain [-1/2, 1/2)
  before evaluation, so periodicity holds exactly in floating point;
* ``||x||`` denotes the distance from x to the nearest integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappush, heappop
from itertools import product

import mpmath

from .errors import NotOneToOne, ResonantSite, SingularArgument

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

Site = tuple


def site(n, dimension=1):
    """Normalize a site given as int (d=1) or iterable of ints to a tuple."""
    if isinstance(n, int):
        if dimension != 1:
            raise ValueError(f"bare int site {n} requires dimension 1, got {dimension}")
        return (n,)
    t = tuple(int(c) for c in n)
    if len(t) != dimension:
        raise ValueError(f"site {t} has wrong dimension (expected {dimension})")
    return t


def origin(dimension):
    return (0,) * dimension


def frac_centered(x):
    """Reduce x modulo 1 into [-1/2, 1/2). Exact for x + integer."""
    r = x - round(x)
    if r >= 0.5:
        r -= 1.0
    elif r < -0.5:
        r += 1.0
    return r


def torus_norm(x):
    """||x|| = dist(x, Z)."""
    return abs(frac_centered(x))


def _frac_centered_mp(x):
    r = x - mpmath.nint(x)
    if r >= mpmath.mpf("0.5"):
        r -= 1
    elif r < mpmath.mpf("-0.5"):
        r += 1
    return r


def _box_iter(dimension, radius):
    """All nonzero integer vectors with |n|_inf <= radius."""
    rng = range(-radius, radius + 1)
    for n in product(rng, repeat=dimension):
        if any(n):
            yield n


# ---------------------------------------------------------------------------
# frequency vectors


@dataclass(frozen=True)
class FrequencyVector:
    """Diophantine frequency vector with box-verified constants.

    The Diophantine inequality ||n . omega|| >= C_dio |n|_inf^(-tau) is
    checked exhaustively for 0 < |n|_inf <= n_check at construction;
    `dio_margin` records the minimal observed ||n.omega|| * |n|^tau.
    """

    omega: tuple
    dio_constant: float
    dio_exponent: float
    n_check: int = 50
    dio_margin: float = field(default=0.0, compare=False)

    def __post_init__(self):
        om = tuple(frac_centered(float(w)) for w in self.omega)
        object.__setattr__(self, "omega", om)
        d = len(om)
        if self.dio_exponent <= d + 1:
            raise ValueError(f"dio_exponent must exceed d+1 = {d + 1}, got {self.dio_exponent}")
        margin = math.inf
        for n in _box_iter(d, self.n_check):
            nrm = torus_norm(self.dot(n))
            if nrm == 0.0:
                raise ValueError(f"||n.omega|| = 0 at n = {n}: rational dependence on the check box")
            margin = min(margin, nrm * max(abs(c) for c in n) ** self.dio_exponent)
        if margin < self.dio_constant * (1.0 - 1e-12):
            raise ValueError(
                f"Diophantine check failed on box {self.n_check}: "
                f"min ||n.omega|| |n|^tau = {margin:.6e} < C_dio = {self.dio_constant:.6e}"
            )
        object.__setattr__(self, "dio_margin", margin)

    @property
    def dimension(self):
        return len(self.omega)

    def dot(self, n):
        return sum(c * w for c, w in zip(n, self.omega))

    def torus_norm_at(self, n):
        return torus_norm(self.dot(n))

    @classmethod
    def fit(cls, omega, dio_exponent=None, n_check=50):
        """Build with C_dio fitted empirically as the box minimum."""
        if isinstance(omega, (int, float)):
            omega = (float(omega),)
        omega = tuple(frac_centered(float(w)) for w in omega)
        d = len(omega)
        tau = float(dio_exponent) if dio_exponent is not None else d + 1.5
        margin = math.inf
        for n in _box_iter(d, n_check):
            nrm = torus_norm(sum(c * w for c, w in zip(n, omega)))
            if nrm == 0.0:
                raise ValueError(f"||n.omega|| = 0 at n = {n}")
            margin = min(margin, nrm * max(abs(c) for c in n) ** tau)
        return cls(omega=omega, dio_constant=margin, dio_exponent=tau, n_check=n_check)


def golden_frequency(dimension=1, n_check=50):
    """Default frequency: golden mean in d=1, (sqrt2-1, sqrt3-1) in d=2."""
    if dimension == 1:
        return FrequencyVector.fit((GOLDEN_MEAN,), n_check=n_check)
    if dimension == 2:
        return FrequencyVector.fit((math.sqrt(2.0) - 1.0, math.sqrt(3.0) - 1.0), n_check=n_check)
    base = [GOLDEN_MEAN] + [math.sqrt(p) - int(math.sqrt(p)) for p in (2, 3, 5, 7, 11)]
    return FrequencyVector.fit(tuple(base[:dimension]), n_check=n_check)


# ---------------------------------------------------------------------------
# potentials

_POTENTIAL_KINDS = ("maryland_tan", "meromorphic_monotone_sample", "piecewise_user", "flat_segment")


@dataclass(frozen=True)
class PotentialSpec:
    """1-periodic sampling function f with declared singularity structure.

    kinds:
      maryland_tan                 f(x) = tan(pi x)
      meromorphic_monotone_sample  f(x) = tan(pi x) + c sin(2 pi x), |c| < 1/2
      flat_segment                 tan(pi r(x)) with a flat ramp r on
                                   [a-h1, a+h1] and linear collars out to a+-h
      piecewise_user               params["func"], declared singular points
    """

    kind: str
    params: dict = field(default_factory=dict)
    delta_sing: float = 1e-9

    def __post_init__(self):
        if self.kind not in _POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        p = self.params
        if self.kind == "meromorphic_monotone_sample":
            c = float(p.get("c", 0.3))
            if abs(c) >= 0.5:
                raise ValueError("meromorphic sample requires |c| < 1/2 for monotonicity")
        if self.kind == "flat_segment":
            a, h, h1 = float(p["a"]), float(p["h"]), float(p["h1"])
            if not (0.0 < h1 < h):
                raise ValueError("flat_segment requires 0 < h1 < h")
            if not (-0.5 < a - 2 * h and a + 2 * h < 0.5):
                raise ValueError("flat_segment collars [a-2h, a+2h] must stay inside (-1/2, 1/2)")
        if self.kind == "piecewise_user" and "func" not in p:
            raise ValueError("piecewise_user requires params['func']")
        unbounded = self.kind != "piecewise_user" or p.get("unbounded", False)
        if unbounded:
            probe = max(1e-6, 10.0 * self.delta_sing)
            lo, hi = self.value(-0.5 + probe), self.value(0.5 - probe)
            if not (lo < -1e3 and hi > 1e3):
                raise ValueError(
                    f"endpoint divergence check failed: f(-1/2+) = {lo:.3g}, f(1/2-) = {hi:.3g}")

    # -- flat-segment ramp ---------------------------------------------------

    def _ramp(self, x):
        a, h, h1 = float(self.params["a"]), float(self.params["h"]), float(self.params["h1"])
        if x <= a - h or x >= a + h:
            return x
        if x < a - h1:
            return (a - h) + (x - (a - h)) * h / (h - h1)
        if x <= a + h1:
            return a
        return (a + h) - ((a + h) - x) * h / (h - h1)

    def singular_distance(self, xr):
        """Distance from reduced argument to the singular set."""
        if self.kind == "piecewise_user":
            pts = self.params.get("singularities", (0.5,))
            return min(torus_norm(xr - s) for s in pts)
        return 0.5 - abs(xr)  # pole at +-1/2 for the tan-based kinds

    def value(self, x):
        xr = frac_centered(x)
        dist = self.singular_distance(xr)
        if dist < self.delta_sing:
            raise SingularArgument(x, dist, self.delta_sing)
        if self.kind == "maryland_tan":
            return math.tan(math.pi * xr)
        if self.kind == "meromorphic_monotone_sample":
            c = float(self.params.get("c", 0.3))
            return math.tan(math.pi * xr) + c * math.sin(2.0 * math.pi * xr)
        if self.kind == "flat_segment":
            return math.tan(math.pi * self._ramp(xr))
        return self.params["func"](xr)

    def value_mp(self, x):
        """High-precision evaluation (mpmath); respects mpmath.mp.dps."""
        xr = _frac_centered_mp(mpmath.mpf(x) if not isinstance(x, mpmath.mpf) else x)
        dist = 0.5 - abs(xr)
        if self.kind == "piecewise_user":
            raise ValueError("high-precision mode is not available for piecewise_user potentials")
        if dist < self.delta_sing:
            raise SingularArgument(float(x), float(dist), self.delta_sing)
        if self.kind == "maryland_tan":
            return mpmath.tan(mpmath.pi * xr)
        if self.kind == "meromorphic_monotone_sample":
            c = mpmath.mpf(float(self.params.get("c", 0.3)))
            return mpmath.tan(mpmath.pi * xr) + c * mpmath.sin(2 * mpmath.pi * xr)
        # flat_segment ramp in mp arithmetic
        a = mpmath.mpf(float(self.params["a"]))
        h = mpmath.mpf(float(self.params["h"]))
        h1 = mpmath.mpf(float(self.params["h1"]))
        if xr <= a - h or xr >= a + h:
            r = xr
        elif xr < a - h1:
            r = (a - h) + (xr - (a - h)) * h / (h - h1)
        elif xr <= a + h1:
            r = a
        else:
            r = (a + h) - ((a + h) - xr) * h / (h - h1)
        return mpmath.tan(mpmath.pi * r)

    @property
    def flat_window(self):
        """(a-h, a+h) for flat_segment kinds, else None."""
        if self.kind != "flat_segment":
            return None
        a, h = float(self.params["a"]), float(self.params["h"])
        return (a - h, a + h)


def potential_value(spec, x):
    """f(x mod 1); raises SingularArgument near poles/endpoints."""
    return spec.value(x)


# ---------------------------------------------------------------------------
# hopping kernels

_SELF_ADJOINT_SAMPLES = (0.0, 0.1371, 0.25, -0.318, 0.5, GOLDEN_MEAN)


@dataclass(frozen=True)
class HoppingKernel:
    """Family Phi^j of finite-range hopping terms, possibly x-dependent.

    ``terms[j]`` maps a lattice offset m (0 < |m|_inf <= j * base_range) to a
    constant amplitude or to a 1-periodic callable phi(x).  Self-adjointness
    phi_{-m} = conj(phi_m) is enforced (sampled for callables).
    """

    dimension: int
    base_range: int
    terms: tuple  # tuple of (order j, tuple of (offset, value))
    constant_flag: bool = True

    def __post_init__(self):
        by_order = {}
        is_complex = False
        norm = 0.0
        for j, entries in self.terms:
            j = int(j)
            if j < 1:
                raise ValueError("hopping orders are positive integers")
            table = {}
            for off, val in entries:
                off = tuple(int(c) for c in off)
                if len(off) != self.dimension:
                    raise ValueError(f"offset {off} has wrong dimension")
                if not any(off):
                    raise ValueError("zero hopping offset is not allowed (phi_0 = 0)")
                if max(abs(c) for c in off) > j * self.base_range:
                    raise ValueError(f"offset {off} violates Range(Phi^{j}) <= {j * self.base_range}")
                table[off] = val
            for off, val in table.items():
                neg = tuple(-c for c in off)
                if neg not in table:
                    raise ValueError(f"missing symmetric offset {neg} for {off} at order {j}")
                other = table[neg]
                if callable(val) != callable(other):
                    raise ValueError("mixed constant/callable symmetric pair")
                if callable(val):
                    for x in _SELF_ADJOINT_SAMPLES:
                        va, vb = complex(val(x)), complex(other(x))
                        if abs(vb - va.conjugate()) > 1e-12 * max(1.0, abs(va)):
                            raise ValueError(f"self-adjointness fails at offset {off}, x={x}")
                        norm = max(norm, abs(va))
                        is_complex = is_complex or abs(va.imag) > 0
                else:
                    va, vb = complex(val), complex(other)
                    if abs(vb - va.conjugate()) > 1e-12 * max(1.0, abs(va)):
                        raise ValueError(f"self-adjointness fails at offset {off}")
                    norm = max(norm, abs(va))
                    is_complex = is_complex or abs(va.imag) > 0
            by_order[j] = table
        const = all(not callable(v) for tab in by_order.values() for v in tab.values())
        object.__setattr__(self, "constant_flag", const)
        object.__setattr__(self, "_by_order", by_order)
        object.__setattr__(self, "_is_complex", is_complex)
        object.__setattr__(self, "_norm_inf", norm)
        object.__setattr__(self, "_dist_cache", {})

    # -- basic queries --------------------------------------------------------

    @property
    def orders(self):
        return tuple(sorted(self._by_order))

    @property
    def max_order(self):
        return max(self._by_order)

    @property
    def is_complex(self):
        return self._is_complex

    @property
    def norm_inf(self):
        """sup_j sup_m |phi^j_m| (sampled for callables)."""
        return self._norm_inf

    def offsets(self, j):
        tab = self._by_order.get(j)
        return tuple(sorted(tab)) if tab else ()

    def amplitude(self, j, offset, x=None):
        """phi^j_offset, evaluated at x for callables; exact 0 if absent."""
        tab = self._by_order.get(j)
        if not tab:
            return 0.0
        val = tab.get(tuple(offset))
        if val is None:
            return 0.0
        if callable(val):
            if x is None:
                raise ValueError("x-dependent hopping amplitude needs a phase argument")
            return val(frac_centered(x))
        return val

    # -- order-weighted lattice metric ----------------------------------------

    def distance(self, n):
        """dist_phi(n, 0): cheapest order-weighted walk from 0 to n."""
        n = tuple(n)
        if not any(n):
            return 0
        cache = self._dist_cache
        if n in cache:
            return cache[n]
        moves = [(j, off) for j in self.orders for off in self.offsets(j)]
        heap = [(0, origin(self.dimension))]
        seen = {}
        while heap:
            cost, cur = heappop(heap)
            if cur in seen:
                continue
            seen[cur] = cost
            cache.setdefault(cur, cost)
            if cur == n:
                return cost
            if cost > 4 * sum(abs(c) for c in n) + 8 * max(self.orders):
                break  # unreachable within sane budget
            for j, off in moves:
                nxt = tuple(a + b for a, b in zip(cur, off))
                if nxt not in seen:
                    heappush(heap, (cost + j, nxt))
        cache[n] = math.inf
        return math.inf

    def ball(self, radius):
        """Sites with dist_phi(n, 0) <= radius, origin included."""
        moves = [(j, off) for j in self.orders for off in self.offsets(j)]
        frontier = {origin(self.dimension): 0}
        heap = [(0, origin(self.dimension))]
        out = set()
        while heap:
            cost, cur = heappop(heap)
            if cost > frontier.get(cur, math.inf):
                continue
            out.add(cur)
            for j, off in moves:
                nxt = tuple(a + b for a, b in zip(cur, off))
                c = cost + j
                if c <= radius and c < frontier.get(nxt, math.inf):
                    frontier[nxt] = c
                    heappush(heap, (c, nxt))
        return sorted(out)


def laplacian_kernel(dimension=1):
    """Nearest-neighbor discrete Laplacian hopping (order 1, amplitude 1)."""
    offs = []
    for axis in range(dimension):
        for sgn in (1, -1):
            off = [0] * dimension
            off[axis] = sgn
            offs.append((tuple(off), 1.0))
    return HoppingKernel(dimension=dimension, base_range=1, terms=((1, tuple(offs)),))


def kernel_from_orders(dimension, base_range, tables):
    """Build a kernel from {order: {offset: value}} mappings."""
    terms = tuple(
        (j, tuple(sorted(tab.items())))
        for j, tab in sorted(tables.items())
    )
    return HoppingKernel(dimension=dimension, base_range=base_range, terms=terms)


def hopping_value(kernel, j, m, n, x, omega=None):
    """Matrix element Phi^j_{mn}(x) = phi^j_{m-n}(x + (m+n).omega/2).

    For constant kernels the phase argument is ignored; x-dependent kernels
    need `omega` to form the symmetric midpoint phase.
    """
    m = tuple(m)
    n = tuple(n)
    off = tuple(a - b for a, b in zip(m, n))
    if kernel.constant_flag:
        return kernel.amplitude(j, off)
    if omega is None:
        raise ValueError("x-dependent kernel requires omega")
    mid = x + 0.5 * sum((a + b) * w for a, b, w in zip(m, n, omega))
    return kernel.amplitude(j, off, mid)


# ---------------------------------------------------------------------------
# operator instances


@dataclass(frozen=True)
class OperatorInstance:
    """H(x0) = f(x0 + n.omega) + sum_j eps^j Phi^j on l2(Z^d)."""

    potential: PotentialSpec
    frequency: FrequencyVector
    phase: float
    epsilon: float
    hopping: HoppingKernel
    n_check: int = 50
    delta_res: float = 1e-12

    def __post_init__(self):
        d = self.frequency.dimension
        if self.hopping.dimension != d:
            raise ValueError("hopping and frequency dimensions disagree")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        v0 = self.potential.value(self.phase)  # raises SingularArgument if x0 is bad
        # flat potentials violate non-resonance by construction; they are
        # handled by the flat-segment transform instead of the raw series
        if self.potential.kind != "flat_segment":
            worst = math.inf
            worst_site = None
            for n in _box_iter(d, self.n_check):
                vn = self.potential.value(self.phase + self.frequency.dot(n))
                gap = abs(vn - v0)
                if gap < worst:
                    worst, worst_site = gap, n
            if worst < self.delta_res:
                raise ResonantSite(worst_site, worst)
        object.__setattr__(self, "_v0", v0)

    @property
    def dimension(self):
        return self.frequency.dimension

    def v(self, n, t=0.0):
        """V_n(t): f(x0 + t + n.omega) for n != 0, constant f(x0) at the origin."""
        n = site(n, self.dimension)
        if not any(n):
            return self._v0
        return self.potential.value(self.phase + t + self.frequency.dot(n))

    def v_mp(self, n, t=0):
        n = site(n, self.dimension)
        x0 = mpmath.mpf(self.phase)
        if not any(n):
            return self.potential.value_mp(x0)
        arg = x0 + mpmath.mpf(t) + mpmath.fsum(c * mpmath.mpf(w) for c, w in zip(n, self.frequency.omega))
        return self.potential.value_mp(arg)

    def phi(self, j, m, n, t=0.0):
        """Phi^j_{mn}(x0 + t)."""
        return hopping_value(self.hopping, j, m, n, self.phase + t, self.frequency.omega)

    def with_phase(self, phase):
        return OperatorInstance(
            potential=self.potential,
            frequency=self.frequency,
            phase=phase,
            epsilon=self.epsilon,
            hopping=self.hopping,
            n_check=self.n_check,
            delta_res=self.delta_res,
        )

    def with_epsilon(self, epsilon):
        return OperatorInstance(
            potential=self.potential,
            frequency=self.frequency,
            phase=self.phase,
            epsilon=epsilon,
            hopping=self.hopping,
            n_check=self.n_check,
            delta_res=self.delta_res,
        )


def v_of(instance, n, t=0.0):
    """Shifted potential V_n(t); V_0(t) is constant in t by definition."""
    return instance.v(n, t)


# ---------------------------------------------------------------------------
# regularity probes


@dataclass(frozen=True)
class RegularityReport:
    """Grid estimates for the one-point regularity conditions at x0."""

    x0: float
    nu: float
    a: float
    b: float
    a1: float
    b1: float
    d_min: float
    c_cr1: float
    c_cr2: float
    c_reg: float
    cr0_pass: bool
    passed: bool
    grid_size: int
    note: str = ""


def _component_bounds(spec, x0, halfwidth, grid):
    """Connected component of {|f - f(x0)| < halfwidth} around x0, by bisection.

    Assumes f is nondecreasing (all built-in kinds). Returns (a, b).
    """
    f0 = spec.value(x0)
    eps = 2.0 * spec.delta_sing

    def hits(x):
        return spec.value(x)

    lo, hi = -0.5 + eps, x0
    # f(lo) = -inf for the unbounded kinds, so f(lo) < f0 - halfwidth always
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if hits(mid) <= f0 - halfwidth:
            lo = mid
        else:
            hi = mid
    a = hi
    lo, hi = x0, 0.5 - eps
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if hits(mid) < f0 + halfwidth:
            lo = mid
        else:
            hi = mid
    b = lo
    # sanity: monotone nondecreasing on a coarse grid (fold-back is an error)
    xs = [a + (b - a) * k / grid for k in range(grid + 1)]
    vals = [hits(x) for x in xs]
    drop = max((vals[k] - vals[k + 1]) for k in range(len(vals) - 1))
    if drop > 1e-9 * max(1.0, abs(f0)):
        raise NotOneToOne(f"f decreases by {drop:.3e} inside the preimage interval around {x0}")
    return a, b


def probe_regularity(spec, x0, grid_size=10_000, nu=1.0):
    """Estimate (a, b), D_min(x0) and the smallest regularity constant.

    Difference quotients on a uniform grid stand in for derivative numbers.
    ``nu`` selects the rescaled variant: the value window is (f0 - 2 nu,
    f0 + 2 nu) and the inner window (f0 - nu, f0 + nu).
    """
    f0 = spec.value(x0)
    coarse = max(200, grid_size // 50)
    a, b = _component_bounds(spec, x0, 2.0 * nu, coarse)
    a1, b1 = _component_bounds(spec, x0, 1.0 * nu, coarse)

    xs = [a + (b - a) * k / grid_size for k in range(grid_size + 1)]
    vals = [spec.value(x) for x in xs]
    h = (b - a) / grid_size
    quots = [(vals[k + 1] - vals[k]) / h for k in range(grid_size)]
    d_min = min(quots)
    d_max = max(quots)
    injective = d_min > 1e-12 * max(1.0, abs(f0))
    c_cr1 = d_max / d_min if injective else math.inf

    # (cr2): g(x) = 1/(f0 - f(x)) on the complement arc (b1, a1 + 1),
    # extended by 0 through the pole at +-1/2.
    eps = 2.0 * spec.delta_sing
    arc = []
    m = grid_size
    for k in range(m + 1):
        x = b1 + (a1 + 1.0 - b1) * k / m
        xr = frac_centered(x)
        if spec.singular_distance(xr) < 100 * eps:
            arc.append((x, 0.0))
        else:
            arc.append((x, 1.0 / (f0 - spec.value(xr))))
    gmax = 0.0
    for k in range(m):
        dx = arc[k + 1][0] - arc[k][0]
        gmax = max(gmax, abs(arc[k + 1][1] - arc[k][1]) / dx)
    c_cr2 = gmax / d_min if injective else math.inf

    c_reg = max(c_cr1, c_cr2)
    return RegularityReport(
        x0=x0,
        nu=nu,
        a=a,
        b=b,
        a1=a1,
        b1=b1,
        d_min=d_min,
        c_cr1=c_cr1,
        c_cr2=c_cr2,
        c_reg=c_reg,
        cr0_pass=injective,
        passed=injective and math.isfinite(c_reg),
        grid_size=grid_size,
        note="" if injective else "zero difference quotient inside (a, b): (cr1) fails",
    )
