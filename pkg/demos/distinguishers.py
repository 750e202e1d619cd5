"""Exact advantages of the canned distinguishers.

The honest pair is indistinguishable, while a |000> source exposes the gap
between the concrete verdict and the ideal resource's independent coin.

    python3 demos/distinguishers.py
"""

from mevsim import qstate
from mevsim.ac import advantage_exact
from mevsim.mev import ProtocolParams, SourceBehavior, build_concrete, build_ideal, dishonest_library, honest_library

params = ProtocolParams(3, 0.5)

print("honest source")
for name, d in honest_library(3).items():
    print(f"  {name:16s} {advantage_exact(build_concrete(params), build_ideal(params), d):.3g}")

bad = SourceBehavior.fixed(qstate.to_density(qstate.basis_state("000")))
print("|000> source")
for name, d in dishonest_library(3, bad).items():
    adv = advantage_exact(build_concrete(params, bad), build_ideal(params, bad), d)
    print(f"  {name:16s} {adv:.4f}")
