import random

import pytest

from mevsim import qstate
from mevsim.ac import advantage_exact, run
from mevsim.errors import ProtocolStateError
from mevsim.mev import (
    MevDriver,
    Outcome,
    ProtocolParams,
    SourceBehavior,
    build_concrete,
    build_ghz,
    build_ideal,
    build_multiround_ideal,
    dishonest_library,
    honest_library,
    run_multiround,
    run_round,
    sample_even_parity,
    verdict,
)
from mevsim.mev.machines import leak_ports, pair_name

P3 = ProtocolParams(3, 0.5)
ZERO3 = qstate.to_density(qstate.basis_state("000"))
FLIP3 = qstate.to_density(qstate.basis_state("001"))

# frozen from the closed-form round distribution (n=3, p=0.5, |000>)
DISHONEST_000 = {"c-bit": 0.0, "verdict": 0.125, "leak-structure": 0.0, "consistency": 0.125, "random": 0.0}


# -- helpers -------------------------------------------------------------------


def test_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(1, 0.5)
    with pytest.raises(ValueError):
        ProtocolParams(3, 0.0)
    with pytest.raises(ValueError):
        ProtocolParams(3, 1.0)
    assert list(ProtocolParams(4, 0.2).parties) == [1, 2, 3, 4]


def test_verdict_rule():
    assert verdict((0, 0, 0), (0, 0, 0)) == 0
    assert verdict((0, 0, 0), (1, 0, 0)) == 1
    assert verdict((1, 1, 0), (0, 0, 0)) == 1  # sum X / 2 = 1
    assert verdict((1, 1, 0), (1, 0, 0)) == 0
    with pytest.raises(ValueError):
        verdict((1, 0, 0), (0, 0, 0))
    with pytest.raises(ValueError):
        verdict((0, 0), (0, 0, 0))


def test_even_parity_sampler_is_uniform():
    rng = random.Random(0)

    class R:
        def bit(self, p=0.5):
            return int(rng.random() < p)

        def bits(self, k):
            return tuple(self.bit() for _ in range(k))

        def uniform(self, k):
            return rng.randrange(k)

    counts = {}
    for _ in range(4000):
        X = tuple(sample_even_parity(3, R()))
        assert sum(X) % 2 == 0
        counts[X] = counts.get(X, 0) + 1
    assert set(counts) == set(qstate.even_parity_strings(3))
    assert all(abs(c / 4000 - 0.25) < 0.04 for c in counts.values())


def test_leak_ports():
    assert set(leak_ports(3)) == {"leak.C", "leak.v", "leak.ch.1.2", "leak.ch.1.3", "leak.ch.2.3"}
    assert pair_name(2, 1) == pair_name(1, 2) == "ch.1.2"


def test_source_behavior_validation():
    with pytest.raises(ValueError):
        SourceBehavior("weird")
    with pytest.raises(ValueError):
        SourceBehavior.schedule([])
    with pytest.raises(ValueError):
        SourceBehavior("adaptive")


def test_source_rejects_wrong_qubit_count():
    with pytest.raises(ValueError):
        MevDriver(3, SourceBehavior.fixed(qstate.ghz_density(2)))


# -- interfaces ----------------------------------------------------------------


def test_honest_interfaces():
    labels = {"party.1", "party.2", "party.3"}
    assert set(build_concrete(P3).open_labels) == labels
    assert set(build_ideal(P3).open_labels) == labels | {"source"}


def test_dishonest_interfaces_match():
    b = SourceBehavior.fixed(ZERO3)
    concrete, ideal = build_concrete(P3, b), build_ideal(P3, b)
    assert set(concrete.open_labels) == set(ideal.open_labels)
    assert set(leak_ports(3)) <= set(concrete.open_labels)


# -- single rounds -------------------------------------------------------------


def test_honest_round_outcomes():
    kinds = set()
    for seed in range(30):
        r = run_round(P3, seed=seed)
        kinds.add(r.kind)
        if r.kind == "qubits":
            assert r.run.register.state(list(r.handles)) == qstate.ghz_density(3)
        else:
            assert r.b_out == 0
    assert kinds == {"qubits", "verdict"}


def test_round_reproducible():
    b = SourceBehavior.fixed(ZERO3)
    a = run_round(P3, b, seed=11).transcript.dump()
    assert a == run_round(P3, b, seed=11).transcript.dump()


def test_leaks_have_round_shape():
    b = SourceBehavior.fixed(ZERO3)
    for seed in range(20):
        r = run_round(P3, b, seed=seed)
        leaks = r.leaks()
        assert leaks["C"] == [r.C]
        if r.C == 1:
            (v,) = leaks["v"]
            assert set(leaks["channels"]) == {f"leak.{pair_name(v, j)}" for j in (1, 2, 3) if j != v}
            assert all(msgs[2] == r.b_out for msgs in leaks["channels"].values())


@pytest.mark.parametrize("world,expected", [("concrete", 0.5), ("ideal", 0.25)])
def test_rejection_rates_000(world, expected):
    b = SourceBehavior.fixed(ZERO3)
    w = build_concrete(P3, b) if world == "concrete" else build_ideal(P3, b)
    tested = rejects = 0
    for seed in range(1500):
        r = run_round(P3, b, seed=seed, wiring=w)
        if r.C == 1:
            tested += 1
            rejects += r.b_out
    rate = rejects / tested
    assert abs(rate - expected) < 4 * (expected * (1 - expected) / tested) ** 0.5


# -- advantages ----------------------------------------------------------------


def test_honest_library_zero():
    for name, d in honest_library(3).items():
        assert advantage_exact(build_concrete(P3), build_ideal(P3), d) <= 1e-12, name


def test_dishonest_library_000():
    b = SourceBehavior.fixed(ZERO3)
    got = {k: advantage_exact(build_concrete(P3, b), build_ideal(P3, b), d) for k, d in dishonest_library(3, b).items()}
    assert got == pytest.approx(DISHONEST_000, abs=1e-9)


def test_dishonest_library_needs_dishonest_source():
    with pytest.raises(ValueError):
        dishonest_library(3, SourceBehavior.honest())


def test_honest_source_ghz_simulated_world_matches():
    # a dishonest-looking source that sends GHZ anyway is perfectly simulated
    b = SourceBehavior.fixed(qstate.ghz_density(3))
    for name, d in dishonest_library(3, b).items():
        assert advantage_exact(build_concrete(P3, b), build_ideal(P3, b), d) <= 1e-12, name


# -- multiple rounds -----------------------------------------------------------


def test_multiround_honest_shares_ghz():
    for seed in range(10):
        m = run_multiround(P3, seed=seed)
        assert m.outcome is Outcome.SHARED
        assert m.final_state == qstate.ghz_density(3)
        assert set(m.verdicts) <= {0}
        assert m.rounds_elapsed == len(m.verdicts) + 1


def test_multiround_outcomes_with_bad_source():
    b = SourceBehavior.fixed(FLIP3)
    seen = {run_multiround(ProtocolParams(3, 0.1), b, max_rounds=2, seed=s).outcome for s in range(30)}
    assert seen == {Outcome.SHARED, Outcome.ABORTED, Outcome.BUDGET}


def test_multiround_schedule_source():
    b = SourceBehavior.schedule([FLIP3, qstate.ghz_density(3)])
    for s in range(10):
        m = run_multiround(P3, b, seed=s)
        assert m.outcome in (Outcome.SHARED, Outcome.ABORTED)
        if m.outcome is Outcome.SHARED:
            # the schedule cycles, so even rounds carry GHZ and odd rounds |001>
            expected = qstate.ghz_density(3) if m.rounds_elapsed % 2 == 0 else FLIP3
            assert m.final_state == expected


def test_ghz_world():
    m = run_multiround(P3, world="ghz", seed=0)
    assert m.outcome is Outcome.SHARED and m.final_state == qstate.ghz_density(3)
    assert set(build_ghz(P3).open_labels) == set(build_multiround_ideal(P3).open_labels)


def test_multiround_ghz_honest_advantage_small():
    a, b = build_multiround_ideal(P3, max_rounds=50), build_ghz(P3)
    for name in ("c-bit", "verdict", "agreement", "ghz-projector"):
        d = honest_library(3)[name]
        zeros_a = sum(run(a, d, s).guess == 0 for s in range(200))
        zeros_b = sum(run(b, d, s).guess == 0 for s in range(200))
        assert abs(zeros_a - zeros_b) / 200 < 0.1, name


def test_unknown_world():
    with pytest.raises(ValueError):
        run_round(P3, world="nowhere")


def test_driver_without_source_fails_cleanly():
    b = SourceBehavior.fixed(ZERO3)
    w = build_concrete(P3, b)
    # an honest driver never answers the open source port, so no round completes
    res = run(w, MevDriver(3))
    assert not any(res.transcript.at(f"party.{i}") for i in (1, 2, 3))
    with pytest.raises(ProtocolStateError):
        from mevsim.mev.worlds import _result_from_run

        _result_from_run(res, 3)
