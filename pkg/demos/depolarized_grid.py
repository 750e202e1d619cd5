"""Exact rejection for depolarized GHZ states against tau^2 / 2.

    python3 demos/depolarized_grid.py
"""

from mevsim import analysis

print("lambda  exact   tau^2/2")
for lam, exact, ideal in analysis.depolarized_grid(3, 10):
    print(f"{lam:5.1f}  {exact:.4f}  {ideal:.4f}")
