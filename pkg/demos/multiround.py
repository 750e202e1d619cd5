"""Repeat rounds until the state is handed out or the protocol aborts.

A source that always sends |001> fails every test round, so the chance it
gets through is p / (p + (1 - p) r) with r = 1/2.

    python3 demos/multiround.py
"""

from mevsim import analysis, qstate
from mevsim.mev import Outcome, ProtocolParams, SourceBehavior, build_multiround_concrete, run_multiround

params = ProtocolParams(3, 0.1)
bad = SourceBehavior.fixed(qstate.to_density(qstate.basis_state("001")))
w = build_multiround_concrete(params, bad, max_rounds=1000)

trials = 3000
outcomes = [run_multiround(params, bad, wiring=w, seed=s).outcome for s in range(trials)]
shared = sum(o is Outcome.SHARED for o in outcomes)
est, hw = analysis.proportion_ci(shared, trials)
print(f"Pr[Shared] = {est:.4f} +/- {hw:.4f}; predicted {analysis.multiround_absorption(0.1, 0.5):.4f}")

honest = ProtocolParams(3, 0.5)
rounds = [run_multiround(honest, seed=s).rounds_elapsed for s in range(trials)]
print(f"honest, p=0.5: mean rounds {sum(rounds) / trials:.3f} (expect 2)")
