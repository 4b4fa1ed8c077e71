"""Contrast-robust iterative solving with a two-level preconditioner.

Compares PCG iteration counts when the coarse level holds one function
per node (the partition of unity itself) versus the spectral coarse
space that keeps every contrast-unbounded local mode.
"""

from gmsfem.studies import run_precond_study

rows = run_precond_study(fine_n=80, coarse_n=8, etas=(1e3, 1e5, 1e7),
                         delta_layers=2)

print(f"{'space':>9} {'eta':>8} {'dim':>5} {'iters':>6} {'cond':>12}")
for variant, eta, dim, iters, cond, conv, cfg in rows:
    tag = "" if conv else "  (no convergence)"
    print(f"{variant:>9} {float(eta):>8.0e} {dim:>5} {iters:>6} "
          f"{float(cond):>12.3e}{tag}")
print("\nwith the spectral coarse space the iteration count and the")
print("condition estimate barely move across four orders of contrast")
