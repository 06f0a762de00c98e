"""Command-line front end.

Subcommands: series, paths, classes, denominators, spectrum, flatseg, report.
Every run writes CSV tables and a JSON report under --out; with a fixed
config the artifacts are byte-identical (headers carry the config hash and
precision mode, floats are printed with repr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .config import load_config
from .errors import ConfigError, QpSeriesError


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, complex):
        return f"{x.real!r}{x.imag:+}j".replace("+-", "-")
    return str(x)


def _write_csv(path, header_meta, columns, rows):
    with open(path, "w") as fh:
        for k, v in header_meta.items():
            fh.write(f"# {k}: {v}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_report(path, header_meta, payload):
    doc = {"meta": dict(header_meta), "report": payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_fmt)
        fh.write("\n")


def _meta(cfg, sub):
    return {
        "tool": "qpseries",
        "subcommand": sub,
        "config_hash": cfg.config_hash(),
        "precision": cfg.precision,
        "seed": cfg.run["seed"],
    }


def _ensure_out(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)


def _ctx(cfg, t=0.0):
    from .paths import PathWeightContext

    prec = cfg.precision
    if prec == "high":
        prec = 50
    return PathWeightContext(instance=cfg.instance, t=t, precision=prec)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_series(cfg):
    from .series import compute_series_longrange, order_residuals, radius_estimate

    res = compute_series_longrange(cfg.instance, cfg.run["order"])
    resid = order_residuals(res)
    meta = _meta(cfg, "series")
    _ensure_out(cfg)
    res.write_json(os.path.join(cfg.out_dir, "series.json"))
    _write_csv(os.path.join(cfg.out_dir, "lambda_s.csv"), meta,
               ["s", "lambda_s", "residual"],
               [(s, res.lambdas[s], resid[s]) for s in range(res.order + 1)])
    rows = []
    for s in range(res.order + 1):
        for n, v in sorted(res.psis[s].items()):
            rows.append((s, " ".join(map(str, n)), v))
    _write_csv(os.path.join(cfg.out_dir, "psi_s.csv"), meta,
               ["s", "site", "amplitude"], rows)
    print(f"series: order {res.order}, radius estimate {radius_estimate(res):.4f}, "
          f"worst residual {max(resid):.2e}")
    for s in range(res.order + 1):
        print(f"  lambda_{s} = {res.lambdas[s]!r}")
    return 0 if max(resid) < 1e-10 else 1


def _cmd_paths(cfg):
    from .paths import cont, enumerate_paths, print_path
    from .series import compute_series_longrange

    s = cfg.run["s_used"] or cfg.run["order"]
    ctx = _ctx(cfg)
    rows = []
    total = 0.0
    for p in enumerate_paths(cfg.instance, "eigenvalue", s):
        c = cont(p, ctx)
        total += c
        rows.append((print_path(p), p.length, float(c)))
    rec = compute_series_longrange(cfg.instance, s)
    diff = abs(total - rec.lambdas[s])
    rel = diff / max(abs(rec.lambdas[s]), 1e-300)
    meta = _meta(cfg, "paths")
    _ensure_out(cfg)
    _write_csv(os.path.join(cfg.out_dir, "paths.csv"), meta,
               ["path", "length", "cont"], rows)
    _write_report(os.path.join(cfg.out_dir, "paths_report.json"), meta, {
        "order": s, "count": len(rows), "path_sum": float(total),
        "recursion": float(rec.lambdas[s]), "rel_diff": rel,
    })
    print(f"paths: {len(rows)} eigenvalue paths of length {s}; "
          f"sum {total!r} vs recursion {rec.lambdas[s]!r} (rel diff {rel:.2e})")
    return 0 if rel < 1e-10 or diff < 1e-14 else 1


def _cmd_classes(cfg):
    import contextlib

    import mpmath

    from .cancel import canonical_translation, cont_class, equivalence_class
    from .paths import cont, enumerate_paths, print_path

    data = cfg.denominator_data()
    s = cfg.run["s_used"] or cfg.run["order"]
    ctx = _ctx(cfg)
    scope = mpmath.workdps(ctx.dps) if ctx.high_precision else contextlib.nullcontext()
    with scope:
        reps = {}
        ungrouped = 0.0
        for p in enumerate_paths(cfg.instance, "eigenvalue", s):
            ungrouped += cont(p, ctx)
            key = print_path(canonical_translation(p, data))
            reps.setdefault(key, p)
        rows = []
        member_rows = []
        grouped = 0.0
        for key, p in sorted(reps.items()):
            members = equivalence_class(p, data)
            val = cont_class(p, ctx, data, method="telescope")
            grouped += val
            peak = 0.0
            for m in members:
                c = cont(m, ctx)
                peak = max(peak, abs(c))
                member_rows.append((key, print_path(m), float(c)))
            rows.append((key, len(members), float(val), float(peak)))
        diff = abs(float(grouped) - float(ungrouped))
        rel = diff / max(abs(float(ungrouped)), 1e-300)
    meta = _meta(cfg, "classes")
    _ensure_out(cfg)
    _write_csv(os.path.join(cfg.out_dir, "classes.csv"), meta,
               ["representative", "size", "cont_class", "max_member"], rows)
    _write_csv(os.path.join(cfg.out_dir, "class_members.csv"), meta,
               ["representative", "member", "cont"], member_rows)
    _write_report(os.path.join(cfg.out_dir, "classes_report.json"), meta, {
        "order": s, "classes": len(rows), "grouped_sum": float(grouped),
        "ungrouped_sum": float(ungrouped), "rel_diff": rel,
    })
    print(f"classes: order {s}: {len(rows)} classes; grouped - ungrouped = {diff:.3e} "
          f"(rel {rel:.2e})")
    return 0 if rel < 1e-10 or diff < 1e-14 else 1


def _cmd_denominators(cfg):
    from .cancel import verify_consistency

    data = cfg.denominator_data()
    rep = verify_consistency(data, cfg.run["box"], kernel=cfg.instance.hopping)
    meta = _meta(cfg, "denominators")
    _ensure_out(cfg)
    _write_report(os.path.join(cfg.out_dir, "consistency.json"), meta, {
        "passed": rep.passed, "beta": rep.beta, "c_safe": rep.c_safe,
        "box": rep.box, "n_small": rep.n_small,
        "largest_beta": rep.largest_beta,
        "c1_violations": [list(map(str, v)) for v in rep.c1_violations[:50]],
        "c2_violations": [list(map(str, v)) for v in rep.c2_violations[:50]],
    })
    print(rep.summary())
    if rep.largest_beta is not None:
        print(f"  bisection estimate of the largest passing beta: {rep.largest_beta:.4f}")
    return 0 if rep.passed else 1


def _cmd_spectrum(cfg):
    from .series import compute_series_longrange, evaluate_partial_sum
    from .spectra import (build_truncated, completeness_check, diagonalize,
                          ids_counting_check, localization_profile,
                          match_series_to_spectrum, window_projection_check)

    inst = cfg.instance
    n_rad = cfg.run["n_radius"]
    s_used = cfg.run["s_used"]
    res = compute_series_longrange(inst, max(cfg.run["order"], s_used))
    op = build_truncated(inst, n_rad)
    es = diagonalize(op)
    match = match_series_to_spectrum(res, op, inst.epsilon, s_used, es)
    _, vec = evaluate_partial_sum(res, inst.epsilon, s_used)
    fit = localization_profile(vec, (0,) * inst.dimension, epsilon=inst.epsilon)
    comp = completeness_check(inst, inst.epsilon, n_rad, s_used)
    win = window_projection_check(inst, cfg.run["window"], inst.epsilon,
                                  min(n_rad, 30), s_used)
    ids_rows = ids_counting_check(inst, cfg.run["energies"], n_rad,
                                  inst.epsilon, cfg.run["order"], s_used)
    rows = []
    import numpy as np
    for k in range(len(es.eigenvalues)):
        v = es.vectors[:, k]
        center = op.sites[int(np.argmax(np.abs(v)))]
        prof = localization_profile(
            {op.sites[i]: v[i] for i in range(len(v)) if abs(v[i]) > 1e-14},
            center)
        rows.append((float(es.eigenvalues[k]), " ".join(map(str, center)), prof.rate))
    meta = _meta(cfg, "spectrum")
    _ensure_out(cfg)
    _write_csv(os.path.join(cfg.out_dir, "spectrum.csv"), meta,
               ["eigenvalue", "center", "decay_rate"], rows)
    _write_csv(os.path.join(cfg.out_dir, "ids.csv"), meta,
               ["energy", "ids_series", "counting", "diff"],
               [r for r in ids_rows if r[1] is not None])
    _write_report(os.path.join(cfg.out_dir, "spectrum_report.json"), meta, {
        "gap": match.gap, "overlap": match.overlap,
        "lambda_partial": match.lambda_partial,
        "decay_rate": fit.rate, "log_eps": math.log(inst.epsilon) if inst.epsilon else None,
        "completeness_gram": comp.dev_gram, "completeness_frame": comp.dev_frame,
        "completeness_fitted_c": comp.fitted_c,
        "window": list(win.window), "window_eigenpairs": win.n_eigenpairs,
        "window_matched": win.n_matched, "window_min_overlap": win.min_overlap,
        "window_passed": win.passed,
    })
    print(f"spectrum: N={n_rad}, eps={inst.epsilon}: |dlambda| = {match.gap:.3e}, "
          f"overlap = {match.overlap:.6f}")
    print(f"  localization rate {fit.rate:.3f} (log eps = {math.log(inst.epsilon):.3f}); "
          f"completeness dev {comp.dev_gram:.3e}")
    print(f"  window {win.window}: {win.n_matched}/{win.n_eigenpairs} eigenpairs "
          f"matched (min overlap {win.min_overlap:.6f})")
    return 0 if win.passed else 1


def _cmd_flatseg(cfg):
    import numpy as np

    from ._jacobi import jacobi_eigh
    from .flatseg import (f1_function, flat_window_sites, sing4_accounting,
                          staged_from_instance, step1, step2)
    from .model import OperatorInstance, PotentialSpec

    flat = cfg.flatseg
    spec = PotentialSpec("flat_segment", {"a": flat["a"], "h": flat["h"], "h1": flat["h1"]})
    inst = OperatorInstance(potential=spec, frequency=cfg.instance.frequency,
                            phase=cfg.instance.phase, epsilon=cfg.instance.epsilon,
                            hopping=cfg.instance.hopping, n_check=cfg.instance.n_check)
    n_rad = cfg.run["n_radius"]
    h1 = step1(inst, n_rad)
    if not flat_window_sites(h1):
        # no flat-window site in the box at this phase: recenter on the window
        inst = inst.with_phase(flat["a"])
        h1 = step1(inst, n_rad)
    h0 = staged_from_instance(inst, n_rad)
    h2 = step2(h1)
    flats = flat_window_sites(h2)
    row_max1 = max((float(abs(h2.phi[1][h2.index[s], :]).max()) for s in flats), default=0.0)
    row_max2 = max((float(abs(h2.phi[2][h2.index[s], :]).max()) for s in flats), default=0.0)
    e0, _ = jacobi_eigh(h0.assemble())
    e2, _ = jacobi_eigh(h2.assemble())
    spec_dev = float(np.max(np.abs(e0 - e2)))
    a, h = flat["a"], flat["h"]
    xs = [a - h + 2 * h * k / cfg.run["grid"] for k in range(cfg.run["grid"] + 1)]
    quot_rows = []
    for eps in cfg.run["epsilons"]:
        ie = inst.with_epsilon(eps)
        f1 = f1_function(ie, xs)
        qs = [(f1[k + 1] - f1[k]) / (xs[k + 1] - xs[k]) for k in range(len(xs) - 1)]
        quot_rows.append((eps, min(qs), min(qs) / eps**2 if eps else math.inf))
    data = cfg.denominator_data()
    s4 = sing4_accounting(h2, data)
    meta = _meta(cfg, "flatseg")
    _ensure_out(cfg)
    _write_csv(os.path.join(cfg.out_dir, "flatseg_quotients.csv"), meta,
               ["epsilon", "min_dq_f1", "min_dq_over_eps2"], quot_rows)
    _write_csv(os.path.join(cfg.out_dir, "flatseg_ranges.csv"), meta,
               ["bucket", "l1_range"],
               [(j, h2.bucket_range(j)) for j in (1, 2, 3)])
    _write_report(os.path.join(cfg.out_dir, "flatseg_report.json"), meta, {
        "flat_sites": [list(s) for s in flats],
        "phi1_flat_row_max": row_max1,
        "phi2_flat_row_max": row_max2,
        "spectral_deviation": spec_dev,
        "sing4_min_return": s4.min_return_length,
        "sing4_passed": s4.passed,
    })
    print(f"flatseg: N={n_rad}: flat rows max |Phi1| = {row_max1}, |Phi2| = {row_max2}; "
          f"interior spectra deviate by {spec_dev:.2e}")
    for eps, mq, ratio in quot_rows:
        print(f"  eps={eps}: min d f1/dx on flat = {mq:.3e} ({ratio:.2f} eps^2)")
    print(f"  sing4: min return length {s4.min_return_length}, passed={s4.passed}")
    ok = row_max1 == 0.0 and row_max2 == 0.0 and spec_dev < 1e-10 and s4.passed
    return 0 if ok else 1


def _cmd_report(cfg):
    print("== series ==")
    rc = _cmd_series(cfg)
    print("== classes ==")
    rc |= _cmd_classes(cfg)
    print("== denominators ==")
    rc |= _cmd_denominators(cfg)
    print("== spectrum ==")
    rc |= _cmd_spectrum(cfg)
    return rc


_COMMANDS = {
    "series": _cmd_series,
    "paths": _cmd_paths,
    "classes": _cmd_classes,
    "denominators": _cmd_denominators,
    "spectrum": _cmd_spectrum,
    "flatseg": _cmd_flatseg,
    "report": _cmd_report,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="qpseries",
                                 description="Perturbation series for quasiperiodic "
                                             "lattice operators: computation and validation")
    ap.add_argument("subcommand", choices=sorted(_COMMANDS))
    ap.add_argument("--config", default=None, help="TOML run configuration")
    ap.add_argument("--out", default="artifacts", help="output directory")
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get("QPSERIES_THREADS", "1")))
    ap.add_argument("--precision", choices=["double", "high"], default=None)
    ap.add_argument("--order", type=int, default=None, help="series order S")
    ap.add_argument("--s-used", type=int, default=None, help="partial-sum order")
    ap.add_argument("--n-radius", type=int, default=None, help="truncation box radius N")
    ap.add_argument("--epsilon", type=float, default=None)
    ap.add_argument("--beta", type=float, default=None)
    ap.add_argument("--box", type=int, default=None, help="consistency check box")
    return ap


def main(argv=None):
    ap = build_parser()
    ns = ap.parse_args(argv)
    overrides = {}
    if ns.order is not None:
        overrides["run.order"] = ns.order
    if ns.s_used is not None:
        overrides["run.s_used"] = ns.s_used
    if ns.n_radius is not None:
        overrides["run.n_radius"] = ns.n_radius
    if ns.epsilon is not None:
        overrides["instance.epsilon"] = ns.epsilon
    if ns.beta is not None:
        overrides["run.beta"] = ns.beta
    if ns.box is not None:
        overrides["run.box"] = ns.box
    try:
        cfg = load_config(ns.config, overrides)
        if ns.precision is not None:
            cfg.precision = ns.precision
        cfg.threads = max(1, ns.threads)
        cfg.out_dir = ns.out
        rc = _COMMANDS[ns.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QpSeriesError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return 1
    return rc


if __name__ == "__main__":
    sys.exit(main())
