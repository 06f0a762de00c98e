"""The graph-path representation of the series coefficients.

Each order-s coefficient is a sum of weighted closed walks: same-sheet steps
carry hopping amplitudes over energy denominators, ascents open a fresh local
frame, and the closing edge returns to the origin.  This script enumerates
the walks, shows a few in the parenthesis notation, and checks the sum rule
against the projection recursion.
"""

from qpseries import (OperatorInstance, PotentialSpec, PathWeightContext,
                      attach, compute_series_recursive, cont, enumerate_paths,
                      golden_frequency, laplacian_kernel, parse_path, print_path)

inst = OperatorInstance(PotentialSpec("maryland_tan"), golden_frequency(),
                        0.1, 0.05, laplacian_kernel(1))
ctx = PathWeightContext(instance=inst)
series = compute_series_recursive(inst, 8)

print("eigenvalue paths per order and the sum rule:")
for s in range(2, 9, 2):
    paths = list(enumerate_paths(inst, "eigenvalue", s))
    total = sum(cont(p, ctx) for p in paths)
    print(f"  s = {s}: {len(paths):4d} paths, sum = {total:+.12e}, "
          f"recursion lambda_{s} = {series.lambdas[s]:+.12e}")

print("\na few order-6 paths and their weights:")
for p in list(enumerate_paths(inst, "eigenvalue", 6))[:8]:
    print(f"  {print_path(p):<22} -> {cont(p, ctx):+.6e}")

print("\nattachment: inserting a loop above a visit multiplies the weight")
base = parse_path("(1234543)", kind="eigenvector")
loop = parse_path("(12321)")
joined = attach(base, loop, 4)  # at the visit of 5
lhs = cont(joined, ctx)
rhs = -cont(base, ctx) * cont(loop, ctx) / (inst.v(0) - inst.v(5))
print(f"  {print_path(base)} + {print_path(loop)} at 5 -> {print_path(joined)}")
print(f"  product rule: {lhs:+.9e} vs {rhs:+.9e}")
