"""pass@k / success@k walk-through.

The estimator answers: if I sampled n solutions and c of them pass, what is
the probability that at least one of a random k-subset passes? Computed as
1 - C(n-c, k) / C(n, k) with exact integer combinatorics.
"""

from apitrail.evaluation import aggregate, format_report, pass_at_k
from apitrail.evaluation import TestOutcome

print("Single problem, n=10 samples, c=3 passing:")
for k in (1, 5, 10):
    print(f"  pass@{k:<2} = {pass_at_k(10, 3, k):.4f}")

print("\nEdge cases:")
print(f"  nothing passes, c=0      -> {pass_at_k(10, 0, 5)}")
print(f"  everything passes, c=n   -> {pass_at_k(10, 10, 1)}")
print(f"  k exceeds failures       -> {pass_at_k(5, 2, 4)}  (cannot miss)")

print("\nWhy it is unbiased: compare against brute-force enumeration")
import itertools

n, c, k = 5, 2, 3
subsets = list(itertools.combinations(range(n), k))
hits = sum(1 for s in subsets if any(i < c for i in s))
print(f"  n={n}, c={c}, k={k}: {hits}/{len(subsets)} subsets hit "
      f"-> {hits / len(subsets)}  vs estimator {pass_at_k(n, c, k)}")

print("\nAggregating a small report (2 problems, 4 samples each):")
outcomes = [TestOutcome("easy", i, passed=True, succeeded=True) for i in range(4)]
outcomes += [
    TestOutcome("hard", i, passed=False, succeeded=i < 2) for i in range(4)
]
report = aggregate(outcomes, k_list=(1, 2, 4))
print(format_report(report))
print("\nsuccess@k >= pass@k always: running clean is easier than being right.")
