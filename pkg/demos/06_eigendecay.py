"""Why small local spaces work: fast eigenvalue decay.

Solutions restricted to a target window span a set with rapidly
decaying generalized eigenvalues; the study prints the decay ratio
lambda_10 / lambda_1 for several local form pairs on a field with a
single centered inclusion.
"""

from gmsfem.studies import run_eigendecay_study

rows = run_eigendecay_study(fine_n=40)

print(f"{'form pair':>26} {'snaps':>6} {'inf':>4} {'lambda_1':>12} "
      f"{'lambda_10':>12} {'ratio':>10}")
for pair, n_snap, n_inf, l1, l10, ratio, cfg in rows:
    print(f"{pair:>26} {n_snap:>6} {n_inf:>4} {float(l1):>12.3e} "
          f"{float(l10):>12.3e} {float(ratio):>10.1e}")
print("\na drop of two orders or more by the tenth eigenvalue means ten")
print("modes per region already capture the reachable local behavior")
