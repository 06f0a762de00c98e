"""Order-by-order eigenvalue/eigenvector coefficients via the projection recursion.

Coefficients are stored free of the coupling; epsilon enters only when a
partial sum is evaluated.  Eigenvector coefficients are finitely supported
maps from lattice sites to amplitudes, with the normalization
(psi_s)_0 = 0 for s >= 1 kept exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ResonantSite
from .model import OperatorInstance, origin, site


@dataclass
class SeriesResult:
    """lambda_0..lambda_S and psi_0..psi_S with provenance."""

    order: int
    lambdas: list
    psis: list  # list of dict site -> amplitude
    method: str
    instance: OperatorInstance

    def __post_init__(self):
        if len(self.lambdas) != self.order + 1 or len(self.psis) != self.order + 1:
            raise ValueError("coefficient tables must have length order + 1")

    @property
    def dimension(self):
        return self.instance.dimension

    def support(self, s):
        return sorted(self.psis[s])

    def to_jsonable(self):
        return {
            "order": self.order,
            "method": self.method,
            "lambdas": [_num_to_json(v) for v in self.lambdas],
            "psis": [
                {",".join(map(str, n)): _num_to_json(v) for n, v in sorted(p.items())}
                for p in self.psis
            ],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_jsonable(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _num_to_json(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return float(v)


def _phi_apply(instance, j, u, t=0.0):
    """(Phi^j u)_n = sum_m Phi^j_{nm}(x0 + t) u_m for finitely supported u."""
    out = {}
    kern = instance.hopping
    offs = kern.offsets(j)
    if not offs:
        return out
    for m, um in u.items():
        if um == 0.0:
            continue
        for off in offs:
            n = tuple(a + b for a, b in zip(m, off))
            w = instance.phi(j, n, m, t)
            if w == 0.0:
                continue
            out[n] = out.get(n, 0.0) + w * um
    return out


def _series_core(instance, order, t=0.0):
    d = instance.dimension
    zero = origin(d)
    v0 = instance.v(zero)
    lambdas = [v0]
    psis = [{zero: 1.0}]
    vcache = {}

    def vat(n):
        if n not in vcache:
            vcache[n] = instance.v(n, t)
        return vcache[n]

    for s in range(1, order + 1):
        acc = {}
        for j in instance.hopping.orders:
            if j > s:
                continue
            for n, val in _phi_apply(instance, j, psis[s - j], t).items():
                acc[n] = acc.get(n, 0.0) + val
        lam_s = acc.get(zero, 0.0)
        for j in range(1, s):
            lj = lambdas[j]
            if lj == 0.0:
                continue
            for n, val in psis[s - j].items():
                acc[n] = acc.get(n, 0.0) - lj * val
        psi_s = {}
        for n, val in acc.items():
            if n == zero:
                continue  # partial inverse extended by zero on the kernel
            gap = v0 - vat(n)
            if abs(gap) < instance.delta_res:
                raise ResonantSite(n, abs(gap))
            if val != 0.0:
                psi_s[n] = val / gap
        lambdas.append(lam_s)
        psis.append(psi_s)
    return lambdas, psis


def compute_series_recursive(instance, order):
    """Single-order (section-2 style) recursion; hopping must be order 1 only."""
    if instance.hopping.orders != (1,):
        raise ValueError("compute_series_recursive requires a pure first-order kernel; "
                         "use compute_series_longrange")
    lambdas, psis = _series_core(instance, order)
    return SeriesResult(order=order, lambdas=lambdas, psis=psis,
                        method="recursion", instance=instance)


def compute_series_longrange(instance, order):
    """Recursion for H = V + eps Phi^1 + eps^2 Phi^2 + ... with Range(Phi^j) <= jR."""
    lambdas, psis = _series_core(instance, order)
    return SeriesResult(order=order, lambdas=lambdas, psis=psis,
                        method="recursion", instance=instance)


def evaluate_partial_sum(result, epsilon, s_used=None):
    """(sum_{s<=S} eps^s lambda_s, sum_{s<=S} eps^s psi_s)."""
    s_used = result.order if s_used is None else s_used
    if s_used > result.order:
        raise ValueError(f"S_used = {s_used} exceeds computed order {result.order}")
    lam = 0.0
    for s in range(s_used, -1, -1):
        lam = lam * epsilon + result.lambdas[s]
    vec = {}
    for s in range(s_used + 1):
        w = epsilon**s
        for n, val in result.psis[s].items():
            vec[n] = vec.get(n, 0.0) + w * val
    return lam, vec


def order_residuals(result):
    """Relative size of the eps^s coefficient of (H psi - lambda psi) per order.

    For an exact solution every residual vanishes up to roundoff; values are
    normalized by the largest term entering that order.
    """
    inst = result.instance
    zero = origin(inst.dimension)
    out = []
    for s in range(result.order + 1):
        res = {}
        scale = 0.0

        def add(vec, coef):
            nonlocal scale
            for n, v in vec.items():
                term = coef * v
                res[n] = res.get(n, 0.0) + term
                scale = max(scale, abs(term))

        add({n: inst.v(n) * v for n, v in result.psis[s].items()}, 1.0)
        for j in inst.hopping.orders:
            if j <= s:
                add(_phi_apply(inst, j, result.psis[s - j]), 1.0)
        for j in range(s + 1):
            add(result.psis[s - j], -result.lambdas[j])
        worst = max((abs(v) for v in res.values()), default=0.0)
        out.append(worst / scale if scale > 0 else 0.0)
    return out


def radius_estimate(result):
    """Crude convergence-radius diagnostic from |lambda_s|^(1/s) growth."""
    rates = [abs(result.lambdas[s]) ** (1.0 / s)
             for s in range(2, result.order + 1) if result.lambdas[s] != 0.0]
    if not rates:
        return math.inf
    tail = rates[len(rates) // 2:]
    return 1.0 / max(tail)


@dataclass
class LambdaCurve:
    """Partial sums of lambda(x) on a phase grid, with per-point error log."""

    xs: list
    values: list  # None where the point failed
    epsilon: float
    s_used: int
    errors: dict = field(default_factory=dict)

    @property
    def ok_pairs(self):
        return [(x, v) for x, v in zip(self.xs, self.values) if v is not None]

    def strictly_increasing(self):
        pairs = self.ok_pairs
        return all(pairs[k + 1][1] > pairs[k][1] for k in range(len(pairs) - 1))

    def min_gap(self):
        pairs = self.ok_pairs
        return min((pairs[k + 1][1] - pairs[k][1] for k in range(len(pairs) - 1)),
                   default=math.inf)

    def invert(self, energy):
        """x with lambda(x) = energy by linear interpolation on the grid."""
        pairs = self.ok_pairs
        for (x0, v0), (x1, v1) in zip(pairs, pairs[1:]):
            if v0 <= energy <= v1:
                if v1 == v0:
                    return 0.5 * (x0 + x1)
                return x0 + (energy - v0) * (x1 - x0) / (v1 - v0)
        raise ValueError(f"energy {energy} outside the computed branch")


def lambda_of_x(instance, order, xs, epsilon, s_used=None):
    """Partial sums of the eigenvalue series along a grid of phases.

    Per-point failures (singular phase, resonance on the support box) are
    collected in the curve's error log instead of aborting the scan.
    """
    s_used = order if s_used is None else s_used
    values = []
    errors = {}
    for x in xs:
        try:
            res = _series_core(instance.with_phase(x), order)
            lam = 0.0
            for s in range(s_used, -1, -1):
                lam = lam * epsilon + res[0][s]
            values.append(lam)
        except Exception as exc:  # per-point errors are data, not fatal
            values.append(None)
            errors[x] = repr(exc)
    return LambdaCurve(xs=list(xs), values=values, epsilon=epsilon,
                       s_used=s_used, errors=errors)
