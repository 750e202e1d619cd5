"""One round of GHZ verification, honest and with a bad source.

Prints the transcript of a single honest round, then compares the measured
rejection rate of a |000> source with the exact value.

    python3 demos/one_round.py
"""

from mevsim import analysis, qstate
from mevsim.mev import ProtocolParams, SourceBehavior, build_concrete, run_round

params = ProtocolParams(3, 0.5)

# first seed that runs a test round
seed = next(s for s in range(100) if run_round(params, seed=s).C == 1)
r = run_round(params, seed=seed)
print(f"honest round, seed {seed}: C={r.C} b_out={r.b_out}")
print(r.transcript.dump())

rho = qstate.to_density(qstate.basis_state("000"))
bad = SourceBehavior.fixed(rho)
w = build_concrete(params, bad)
tested = rejected = 0
for s in range(4000):
    r = run_round(params, bad, seed=s, wiring=w)
    if r.C:
        tested += 1
        rejected += r.b_out
print(f"|000> source: rejected {rejected}/{tested} = {rejected / tested:.3f}")
print(f"exact {analysis.exact_rejection_probability(rho):.3f}, tau^2/2 = {analysis.ideal_rejection_probability(rho):.3f}")
