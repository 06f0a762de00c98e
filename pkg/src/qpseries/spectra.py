"""Truncated operators, dense eigensolver oracle, and series-vs-spectrum checks.

The truncated matrix (hard Dirichlet cutoff on |n|_inf <= N) is the
independent reference the perturbation series is validated against:
eigenvalue matching, eigenvector overlap and localization, near-unitary
completeness of the translated series family, and energy-window projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _iproduct

import numpy as np

from ._jacobi import jacobi_eigh
from .errors import SingularArgument, SingularSite
from .model import site
from .series import _series_core, evaluate_partial_sum


@dataclass
class TruncatedOperator:
    """Dirichlet restriction of H(x0) to the box |n|_inf <= N."""

    instance: object
    n_radius: int
    sites: list
    index: dict
    matrix: np.ndarray

    @property
    def dimension(self):
        return len(self.matrix)


@dataclass
class EigenSystem:
    eigenvalues: np.ndarray  # ascending
    vectors: np.ndarray      # columns, matching order

    def residual(self, op):
        h = op.matrix
        r = h @ self.vectors - self.vectors * self.eigenvalues[None, :]
        return float(np.max(np.abs(r)))


def box_sites(dimension, n_radius):
    rng = range(-n_radius, n_radius + 1)
    return sorted(_iproduct(rng, repeat=dimension))


def build_truncated(instance, n_radius):
    """Assemble the (2N+1)^d Hermitian matrix; exactly Hermitian by mirroring."""
    d = instance.dimension
    sites = box_sites(d, n_radius)
    index = {s: i for i, s in enumerate(sites)}
    dim = len(sites)
    kern = instance.hopping
    dtype = complex if kern.is_complex else float
    h = np.zeros((dim, dim), dtype=dtype)
    for s in sites:
        try:
            h[index[s], index[s]] = instance.v(s)
        except SingularArgument:
            raise SingularSite(s)
    eps = instance.epsilon
    for j in kern.orders:
        w = eps**j
        if w == 0.0 and j > 0 and eps == 0.0:
            continue
        for m in sites:
            im = index[m]
            for off in kern.offsets(j):
                n = tuple(a + b for a, b in zip(m, off))
                i_n = index.get(n)
                if i_n is None or i_n <= im:
                    continue
                val = w * instance.phi(j, m, n, 0.0)
                if val == 0.0:
                    continue
                h[im, i_n] += val
                h[i_n, im] += np.conj(val) if kern.is_complex else val
    return TruncatedOperator(instance=instance, n_radius=n_radius,
                             sites=sites, index=index, matrix=h)


def diagonalize(op, dim_cap=4096, tol=1e-14, max_sweeps=80):
    """Full eigensystem via the internal rotation-based solver."""
    if op.dimension > dim_cap:
        raise ValueError(f"matrix dimension {op.dimension} exceeds the cap {dim_cap}")
    evals, vecs = jacobi_eigh(op.matrix, tol=tol, max_sweeps=max_sweeps)
    return EigenSystem(eigenvalues=evals, vectors=vecs)


def embed_vector(vec, op):
    """Finitely supported map -> dense vector on the operator's box."""
    out = np.zeros(op.dimension, dtype=complex if any(isinstance(v, complex) for v in vec.values()) else float)
    for n, v in vec.items():
        i = op.index.get(tuple(n))
        if i is not None:
            out[i] = v
    return out


@dataclass
class MatchReport:
    lambda_partial: float
    nearest_eigenvalue: float
    gap: float
    overlap: float
    eig_index: int
    epsilon: float
    s_used: int


def match_series_to_spectrum(series, op, epsilon, s_used, eigensystem=None):
    """Nearest eigenvalue to the partial sum and best-overlap eigenvector."""
    es = eigensystem if eigensystem is not None else diagonalize(op)
    lam, vec = evaluate_partial_sum(series, epsilon, s_used)
    k = int(np.argmin(np.abs(es.eigenvalues - lam)))
    psi = embed_vector(vec, op)
    nrm = np.linalg.norm(psi)
    overlaps = np.abs(es.vectors.conj().T @ psi) / max(nrm, 1e-300)
    k_vec = int(np.argmax(overlaps))
    return MatchReport(
        lambda_partial=lam,
        nearest_eigenvalue=float(es.eigenvalues[k]),
        gap=float(abs(es.eigenvalues[k] - lam)),
        overlap=float(overlaps[k_vec]),
        eig_index=k,
        epsilon=epsilon,
        s_used=s_used,
    )


def halving_report(instance, n_radius, epsilon, order, s_used):
    """|dlambda| at eps and eps/2 plus the ratio (order-scaling diagnostic)."""
    from .series import compute_series_longrange

    series = compute_series_longrange(instance, order)
    out = {}
    for e in (epsilon, epsilon / 2.0):
        op = build_truncated(instance.with_epsilon(e), n_radius)
        out[e] = match_series_to_spectrum(series, op, e, s_used)
    ratio = out[epsilon].gap / out[epsilon / 2.0].gap if out[epsilon / 2.0].gap > 0 else math.inf
    return out[epsilon], out[epsilon / 2.0], ratio


# ---------------------------------------------------------------------------
# localization diagnostics


@dataclass
class DecayFit:
    rate: float          # slope of log|psi| vs distance
    intercept: float
    sup_constant: float  # max |psi_m| / envelope, when epsilon given
    envelope_ok: bool
    points: int


def localization_profile(vector, center, epsilon=None, c_dist=1.0, envelope_c=None):
    """Least-squares decay fit of log|psi_m| against |m - center|_inf.

    With `epsilon` given, also tests the envelope |psi_m| <= c eps^(|m-center|/c_dist)
    (floor-exponent form); `envelope_c` pins c, otherwise it is fitted.
    """
    center = tuple(center)
    pts = []
    for n, v in (vector.items() if isinstance(vector, dict) else vector):
        dist = max(abs(a - b) for a, b in zip(tuple(n), center))
        a = abs(v)
        if a > 1e-300:
            pts.append((dist, math.log(a)))
    if len(pts) < 2:
        return DecayFit(rate=-math.inf, intercept=0.0, sup_constant=0.0,
                        envelope_ok=True, points=len(pts))
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    rate, intercept = np.polyfit(xs, ys, 1)
    sup_c = 0.0
    ok = True
    if epsilon is not None and epsilon > 0:
        for dist, ly in pts:
            env = math.floor(dist / c_dist) * math.log(epsilon)
            sup_c = max(sup_c, math.exp(ly - env))
        if envelope_c is not None:
            ok = sup_c <= envelope_c
    return DecayFit(rate=float(rate), intercept=float(intercept),
                    sup_constant=sup_c, envelope_ok=ok, points=len(pts))


# ---------------------------------------------------------------------------
# completeness of the translated eigenvector family


def series_family(instance, order, inner_sites):
    """psi[n] for each n: series started at n, i.e. phase x0 + n.omega.

    Returns {n: (lambdas, psis)} with coefficients in the frame centered at n.
    """
    fam = {}
    for n in inner_sites:
        shifted = instance.with_phase(instance.phase + instance.frequency.dot(n))
        fam[n] = _series_core(shifted, order)
    return fam


@dataclass
class CompletenessReport:
    epsilon: float
    s_used: int
    n_radius: int
    inner_radius: int
    dev_gram: float      # ||U*U - I||_max on the inner box
    dev_frame: float     # ||UU* - I||_max restricted to the inner box
    fitted_c: float


def completeness_check(instance, epsilon, n_radius, s_used, inner_radius=None):
    """Near-unitarity of U = [psi[n]]_{n in inner box} per the translated series."""
    d = instance.dimension
    reach = s_used * max(instance.hopping.orders) * instance.hopping.base_range
    if inner_radius is None:
        inner_radius = n_radius - reach
    if inner_radius < 0:
        raise ValueError("box too small for the requested order")
    inner = box_sites(d, inner_radius)
    outer = box_sites(d, n_radius)
    index = {s: i for i, s in enumerate(outer)}
    fam = series_family(instance, s_used, inner)
    dtype = complex if instance.hopping.is_complex else float
    u = np.zeros((len(outer), len(inner)), dtype=dtype)
    for col, n in enumerate(inner):
        lams, psis = fam[n]
        vec = {}
        for s in range(s_used + 1):
            w = epsilon**s
            for k, v in psis[s].items():
                m = tuple(a + b for a, b in zip(n, k))
                vec[m] = vec.get(m, 0.0) + w * v
        for m, v in vec.items():
            i = index.get(m)
            if i is not None:
                u[i, col] = v
    gram = u.conj().T @ u - np.eye(len(inner))
    dev_gram = float(np.max(np.abs(gram)))
    frame = u @ u.conj().T - np.eye(len(outer))
    inner_idx = [index[s] for s in inner]
    dev_frame = float(np.max(np.abs(frame[np.ix_(inner_idx, inner_idx)])))
    dev = max(dev_gram, dev_frame)
    return CompletenessReport(
        epsilon=epsilon, s_used=s_used, n_radius=n_radius, inner_radius=inner_radius,
        dev_gram=dev_gram, dev_frame=dev_frame,
        fitted_c=dev / epsilon if epsilon > 0 else 0.0,
    )


# ---------------------------------------------------------------------------
# energy-window projections (local localization)


@dataclass
class WindowReport:
    window: tuple
    energy_window: tuple
    margin: float
    n_eigenpairs: int
    n_matched: int
    min_overlap: float
    orth_quotient: float   # min ||(H - mid) v|| / (halfwidth ||v||) over probes
    passed: bool


def window_projection_check(instance, window, epsilon, n_radius, s_used,
                            margin=None, inner_radius=None, probes=8, seed=11):
    """Eigenvectors with energy inside [f(alpha), f(beta)] (shrunk by a margin)
    and localization center in the inner box must lie in the span of the
    series vectors psi[n] with {x0 + n.omega} in (alpha, beta)."""
    alpha, beta = window
    d = instance.dimension
    f = instance.potential
    e_lo, e_hi = f.value(alpha), f.value(beta)
    op = build_truncated(instance.with_epsilon(epsilon), n_radius)
    es = diagonalize(op)
    reach = s_used * max(instance.hopping.orders) * instance.hopping.base_range
    if inner_radius is None:
        inner_radius = n_radius - reach
    inner = box_sites(d, inner_radius)
    from .model import frac_centered
    sel = [n for n in inner
           if alpha < frac_centered(instance.phase + instance.frequency.dot(n)) < beta]
    fam = series_family(instance, s_used, sel)
    dtype = complex if instance.hopping.is_complex else float
    cols = []
    for n in sel:
        _, psis = fam[n]
        vec = np.zeros(op.dimension, dtype=dtype)
        for s in range(s_used + 1):
            w = epsilon**s
            for k, v in psis[s].items():
                m = tuple(a + b for a, b in zip(n, k))
                i = op.index.get(m)
                if i is not None:
                    vec[i] += w * v
        cols.append(vec)
    if not cols:
        raise ValueError("no series vectors in the window; widen it")
    u = np.array(cols).T
    gram = u.conj().T @ u
    if margin is None:
        # estimate the matching tolerance from the family residuals
        lam_list = []
        for n in sel:
            lams, _ = fam[n]
            lam = 0.0
            for s in range(s_used, -1, -1):
                lam = lam * epsilon + lams[s]
            lam_list.append(lam)
        gaps = [float(np.min(np.abs(es.eigenvalues - lam))) for lam in lam_list]
        margin = 5.0 * max(max(gaps), 1e-12)

    def project_coeffs(v):
        return np.linalg.solve(gram, u.conj().T @ v)

    n_total = 0
    n_matched = 0
    min_overlap = 1.0
    for k, lam in enumerate(es.eigenvalues):
        if not (e_lo + margin <= lam <= e_hi - margin):
            continue
        v = es.vectors[:, k]
        center = op.sites[int(np.argmax(np.abs(v)))]
        if max(abs(c) for c in center) > inner_radius:
            continue
        n_total += 1
        proj = u @ project_coeffs(v)
        overlap = float(np.linalg.norm(proj) / np.linalg.norm(v))
        min_overlap = min(min_overlap, overlap)
        if overlap >= 1.0 - 10.0 * epsilon:
            n_matched += 1

    # probe vectors orthogonal to the window span, supported in the inner box
    rng = np.random.default_rng(seed)
    mid = 0.5 * (e_lo + e_hi)
    half = 0.5 * (e_hi - e_lo)
    inner_idx = [op.index[s] for s in inner]
    quotient = math.inf
    for _ in range(probes):
        w = np.zeros(op.dimension, dtype=dtype)
        w[inner_idx] = rng.standard_normal(len(inner_idx))
        w -= u @ project_coeffs(w)
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            continue
        w /= nw
        val = float(np.linalg.norm(op.matrix @ w - mid * w))
        quotient = min(quotient, val / half)
    return WindowReport(
        window=(alpha, beta), energy_window=(e_lo, e_hi), margin=margin,
        n_eigenpairs=n_total, n_matched=n_matched, min_overlap=min_overlap,
        orth_quotient=quotient,
        passed=(n_total == n_matched) and n_total > 0,
    )


# ---------------------------------------------------------------------------
# integrated density of states


def ids_counting_check(instance, energies, n_radius, epsilon, order, s_used=None):
    """Counting measure of the truncated spectrum vs lambda^{-1}(E) + 1/2."""
    op = build_truncated(instance.with_epsilon(epsilon), n_radius)
    es = diagonalize(op)
    dim = op.dimension
    # invert lambda(x) on the branch by bisection over the phase
    s_used = order if s_used is None else s_used

    def lam_at(x):
        lams, _ = _series_core(instance.with_phase(x), order)
        out = 0.0
        for s in range(s_used, -1, -1):
            out = out * epsilon + lams[s]
        return out

    rows = []
    for e_val in energies:
        lo, hi = -0.5 + 1e-6, 0.5 - 1e-6
        if lam_at(lo) > e_val or lam_at(hi) < e_val:
            rows.append((e_val, None, None, None))
            continue
        a, b = lo, hi
        for _ in range(60):
            midx = 0.5 * (a + b)
            if lam_at(midx) <= e_val:
                a = midx
            else:
                b = midx
        x_inv = 0.5 * (a + b)
        ids_series = x_inv + 0.5
        count = float(np.sum(es.eigenvalues <= e_val)) / dim
        rows.append((e_val, ids_series, count, abs(count - ids_series)))
    return rows
