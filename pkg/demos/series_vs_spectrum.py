"""Eigenvalue perturbation series against a dense truncated-matrix oracle.

Walks through the basic workflow: build a Maryland-type operator on the
golden-mean orbit, compute the expansion coefficients, evaluate partial sums,
and compare with the spectrum of a truncated matrix.  The error should drop
by roughly 2^(S+1) when the coupling is halved (here 2^8, since the order-7
coefficient vanishes by parity).
"""

from qpseries import (OperatorInstance, PotentialSpec, build_truncated,
                      compute_series_recursive, diagonalize,
                      evaluate_partial_sum, golden_frequency,
                      laplacian_kernel, match_series_to_spectrum)

inst = OperatorInstance(
    potential=PotentialSpec("maryland_tan"),
    frequency=golden_frequency(),
    phase=0.1,
    epsilon=0.05,
    hopping=laplacian_kernel(1),
)

series = compute_series_recursive(inst, 10)
print("expansion coefficients (phase 0.1, golden frequency):")
for s, lam in enumerate(series.lambdas):
    print(f"  lambda_{s} = {lam:+.12e}")

print("\npartial sums vs the nearest eigenvalue of the truncated matrix (N = 40):")
for eps in (0.05, 0.025):
    op = build_truncated(inst.with_epsilon(eps), 40)
    es = diagonalize(op)
    for s_used in (2, 4, 6):
        rep = match_series_to_spectrum(series, op, eps, s_used, es)
        print(f"  eps = {eps:<6} S = {s_used}:  |dlambda| = {rep.gap:.3e}   "
              f"overlap = {rep.overlap:.9f}")

lam6_a, _ = evaluate_partial_sum(series, 0.05, 6)
op_a = build_truncated(inst, 40)
es_a = diagonalize(op_a)
gap_a = match_series_to_spectrum(series, op_a, 0.05, 6, es_a).gap
op_b = build_truncated(inst.with_epsilon(0.025), 40)
gap_b = match_series_to_spectrum(series, op_b, 0.025, 6, diagonalize(op_b)).gap
print(f"\nhalving the coupling: error ratio {gap_a / gap_b:.1f} "
      f"(expect about 2^8 = 256: lambda_7 = 0 by parity)")
