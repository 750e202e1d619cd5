"""Canned distinguishers for the verification worlds.

The honest library faces the party interfaces only. The dishonest library
plays a given source behavior and also reads the leak interfaces.
"""

from __future__ import annotations

from mevsim import qstate
from mevsim.ac.messages import Abort, Bit, Qubit, StateDesc
from mevsim.mev.machines import SourceBehavior, leak_label, sample_even_parity, verdict
from mevsim.mev.worlds import SOURCE, MevDriver, party_label


def _c_and_rest(view):
    """(C, qubit handle or None, b_out or None) from one party's one-round view."""
    if not view or not isinstance(view[0], Bit):
        return None, None, None
    c = view[0].b
    rest = view[1] if len(view) > 1 else None
    if isinstance(rest, Qubit):
        return c, rest.handle, None
    if isinstance(rest, Bit):
        return c, None, rest.b
    return c, None, None


def _shared_handles(d: MevDriver, state) -> list[int] | None:
    handles = []
    for i in range(1, d.n + 1):
        qs = [m.handle for m in d.party_view(state, i) if isinstance(m, Qubit)]
        if not qs:
            return None
        handles.append(qs[-1])
    return handles


class CBit(MevDriver):
    """Guesses the C bit seen at party 1."""

    name = "c-bit"

    def decide(self, state, ctx):
        c, _, _ = _c_and_rest(self.party_view(state))
        return c or 0


class Verdict(MevDriver):
    """Guesses b_out (0 when the round kept its state, or when a multi-round run never aborted)."""

    name = "verdict"

    def decide(self, state, ctx):
        view = self.party_view(state)
        if any(isinstance(m, Abort) for m in view):
            return 1
        _, _, b = _c_and_rest(view)
        return b or 0


class XParity(MevDriver):
    """On delivered qubits, measures each in the X basis and guesses the outcome parity."""

    name = "x-parity"

    def decide(self, state, ctx):
        handles = _shared_handles(self, state)
        if handles is None:
            return Verdict.decide(self, state, ctx)
        ys = [ctx.register.measure(h, ctx.rng, ctx.name, gate=qstate.H) for h in handles]
        return sum(ys) % 2


class GhzProjector(MevDriver):
    """On delivered qubits, measures {GHZ, not GHZ}; otherwise guesses b_out."""

    name = "ghz-projector"

    def decide(self, state, ctx):
        handles = _shared_handles(self, state)
        if handles is None:
            return Verdict.decide(self, state, ctx)
        return ctx.register.project(handles, qstate.make_ghz(self.n), ctx.rng, ctx.name)


class XYTest(MevDriver):
    """On delivered qubits, runs one XY test itself with fresh even-parity instructions."""

    name = "xy-test"

    def decide(self, state, ctx):
        handles = _shared_handles(self, state)
        if handles is None:
            return Verdict.decide(self, state, ctx)
        X = sample_even_parity(self.n, ctx.rng)
        Y = [ctx.register.measure(h, ctx.rng, ctx.name, gate=qstate.gate_for(x)) for h, x in zip(handles, X)]
        return verdict(X, Y)


class Agreement(MevDriver):
    """Guesses 0 iff every party interface tells the same classical story."""

    name = "agreement"

    def decide(self, state, ctx):
        def story(i):
            return [m.tag if isinstance(m, Qubit) else m for m in self.party_view(state, i)]

        first = story(1)
        return 0 if first and all(story(i) == first for i in range(2, self.n + 1)) else 1


class RandomGuess(MevDriver):
    name = "random"

    def decide(self, state, ctx):
        return ctx.rng.bit()


class LeakStructure(MevDriver):
    """Guesses 0 iff the leaked round has the expected shape.

    C = 0: a single C leak and nothing else. C = 1: one verifier id, and each
    channel between the verifier and another party carries exactly
    (x_j, y_j, b_out), consistent with the b_out seen at the parties.
    """

    name = "leak-structure"

    def decide(self, state, ctx):
        seen = state["seen"]
        cs = [m.b for m in seen.get("leak.C", [])]
        views = [m for m in seen.get("leak.v", [])]
        chans = {k: v for k, v in seen.items() if k.startswith("leak.ch.")}
        if len(cs) != 1:
            return 1
        if cs[0] == 0:
            return 0 if not views and not chans else 1
        if len(views) != 1:
            return 1
        v = views[0].v
        _, _, b = _c_and_rest(self.party_view(state))
        expected = {leak_label(v, j) for j in range(1, self.n + 1) if j != v}
        if set(chans) != expected:
            return 1
        for msgs in chans.values():
            if len(msgs) != 3 or not all(isinstance(m, Bit) for m in msgs) or msgs[2].b != b:
                return 1
        return 0


class Consistency(MevDriver):
    """Checks b_out against the leaked instructions and outcomes.

    X is fully known from the leaks (parity fixes x_v); only y_v is hidden.
    Under the concrete statistics of the state the source sent, this gives
    Pr[b_out | leaks]; in the ideal world b_out = 1 with probability
    tau**2 / 2 whatever leaked. Guesses 0 (concrete) iff the observed b_out
    is strictly more likely under the concrete rule. This is the
    likelihood-ratio test between the two worlds' observable round
    distributions.
    """

    name = "consistency"

    def initial_state(self):
        state = super().initial_state()
        state["sent"] = []
        return state

    def step(self, label, msg, state, ctx):
        out = super().step(label, msg, state, ctx)
        state["sent"] += [m.state for lab, m in out if lab == SOURCE and isinstance(m, StateDesc)]
        return out

    def decide(self, state, ctx):
        seen = state["seen"]
        c, _, b = _c_and_rest(self.party_view(state))
        if c != 1 or not state["sent"] or not seen.get("leak.v"):
            return 0
        rho = state["sent"][-1]
        n = self.n
        v = seen["leak.v"][0].v
        X, Y = [0] * n, [0] * n
        for j in range(1, n + 1):
            if j == v:
                continue
            msgs = seen.get(leak_label(v, j), [])
            if len(msgs) < 2:
                return 1
            X[j - 1], Y[j - 1] = msgs[0].b, msgs[1].b
        X[v - 1] = sum(X) % 2
        table = qstate.gated_outcome_distribution(rho, tuple(X))
        weights = {}
        for y in (0, 1):
            Y[v - 1] = y
            weights[y] = float(table[qstate.bits_to_index(Y)])
        total = weights[0] + weights[1]
        if total <= 0.0:
            return 1
        p_concrete = 0.0
        for y, w in weights.items():
            Y[v - 1] = y
            if verdict(X, Y) == b:
                p_concrete += w / total
        tau = qstate.ghz_distance(rho)
        p_reject = tau * tau / 2
        p_ideal = p_reject if b == 1 else 1.0 - p_reject
        return 0 if p_concrete > p_ideal + 1e-12 else 1


HONEST = (CBit, Verdict, XParity, GhzProjector, XYTest, Agreement, RandomGuess)
DISHONEST = (CBit, Verdict, LeakStructure, Consistency, RandomGuess)


def honest_library(n: int) -> dict[str, MevDriver]:
    return {cls.name: cls(n) for cls in HONEST}


def dishonest_library(n: int, behavior: SourceBehavior) -> dict[str, MevDriver]:
    if behavior.is_honest:
        raise ValueError("the dishonest library needs a non-honest source behavior")
    return {cls.name: cls(n, behavior) for cls in DISHONEST}


__all__ = [
    "Agreement",
    "CBit",
    "Consistency",
    "GhzProjector",
    "LeakStructure",
    "RandomGuess",
    "Verdict",
    "XParity",
    "XYTest",
    "dishonest_library",
    "honest_library",
    "party_label",
]
