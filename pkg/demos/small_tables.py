"""Reduced versions of the synthetic distance and KL tables (few repeats, small n).

    python3 demos/small_tables.py
"""

from edd import experiments

hs = experiments.run_table1(ns=(10, 100), repeats=5, seed=0)
kl = experiments.run_table2(ns=(100,), repeats=5, seed=0)
print("HS distance to the true next distribution")
for r in hs:
    print(f"  {r['setting']:14s} n={r['n']:<5d} {r['method']:14s} {r['mean']:.4f}")
print("KL divergence")
for r in kl:
    print(f"  {r['setting']:14s} n={r['n']:<5d} {r['method']:14s} {r['mean']:.4f}")
