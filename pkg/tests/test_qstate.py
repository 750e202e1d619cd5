import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mevsim import qstate
from mevsim.errors import DimensionError, InvalidDistributionError, InvalidStateError

# values frozen from an independent np.kron / np.linalg.eigvalsh oracle
GHZ2_X11 = [0.0, 0.5, 0.5, 0.0]
GHZ3_X000_SUPPORT = {(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)}
TD_GHZ3_000 = 0.7071067811865476
TD_DEPOL3_HALF = 0.4375


def basis(bits):
    return qstate.to_density(qstate.basis_state(bits))


# -- construction and invariants ---------------------------------------------


def test_ghz_amplitudes():
    psi = qstate.make_ghz(3)
    assert psi.amps[0] == pytest.approx(1 / math.sqrt(2))
    assert psi.amps[7] == pytest.approx(1 / math.sqrt(2))
    assert np.count_nonzero(psi.amps) == 2


def test_big_endian_indexing():
    assert qstate.index_to_bits(3, 3) == (0, 1, 1)
    assert qstate.bits_to_index((1, 0, 0)) == 4
    assert qstate.basis_state("001").amps[1] == 1


def test_even_parity_strings():
    ev = qstate.even_parity_strings(3)
    assert set(ev) == {(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)}
    assert len(qstate.even_parity_strings(5)) == 16


@pytest.mark.parametrize(
    "data",
    [
        np.array([[1, 0], [0, 0.5]]),  # trace
        np.array([[0.5, 0.5j], [0.5j, 0.5]]),  # not Hermitian
        np.array([[1.5, 0], [0, -0.5]]),  # not PSD
        np.array([[np.nan, 0], [0, 1]]),
    ],
)
def test_density_invariants_rejected(data):
    with pytest.raises(InvalidStateError):
        qstate.DensityMatrix(data)


def test_pure_norm_rejected():
    with pytest.raises(InvalidStateError):
        qstate.PureState([1.0, 1.0])


def test_bad_dimension():
    with pytest.raises(DimensionError):
        qstate.DensityMatrix(np.eye(3) / 3)
    with pytest.raises(DimensionError):
        qstate.make_ghz(0)


def test_density_is_immutable_and_hashable():
    rho = qstate.ghz_density(2)
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1
    assert rho == qstate.to_density(qstate.make_ghz(2))
    assert len({rho, qstate.to_density(qstate.make_ghz(2))}) == 1


def test_depolarize_endpoints():
    assert qstate.depolarize_ghz(3, 0.0) == qstate.ghz_density(3)
    assert np.allclose(qstate.depolarize_ghz(3, 1.0).data, np.eye(8) / 8)
    with pytest.raises(ValueError):
        qstate.depolarize_ghz(3, 1.5)


# -- gates and outcome tables --------------------------------------------------


def test_gates_are_unitary():
    for g in (qstate.H, qstate.SQRT_X):
        assert np.allclose(g @ g.conj().T, np.eye(2))
    assert np.allclose(qstate.SQRT_X @ qstate.SQRT_X, [[0, 1], [1, 0]])


def test_outcome_table_ghz2_x11():
    dist = qstate.outcome_distribution(qstate.apply_local_gates(qstate.ghz_density(2), (1, 1)))
    assert np.allclose(dist, GHZ2_X11, atol=1e-12)


def test_outcome_table_ghz3_x000():
    dist = qstate.outcome_distribution(qstate.apply_local_gates(qstate.ghz_density(3), (0, 0, 0)))
    for k, pr in enumerate(dist):
        bits = qstate.index_to_bits(k, 3)
        assert pr == pytest.approx(0.25 if bits in GHZ3_X000_SUPPORT else 0.0, abs=1e-12)


def test_apply_gate_matches_kron():
    rng = np.random.default_rng(4)
    rho = qstate.random_density(3, rng)
    for q in range(3):
        ops = [np.eye(2)] * 3
        ops[q] = qstate.SQRT_X
        U = np.kron(np.kron(ops[0], ops[1]), ops[2])
        assert np.allclose(qstate.apply_gate(rho, q, qstate.SQRT_X).data, U @ rho.data @ U.conj().T)


def test_apply_gate_large_register_matches_kron():
    rng = np.random.default_rng(5)
    rho = qstate.random_density(7, rng, rank=2)
    for q in (0, 3, 6):
        U = np.kron(np.kron(np.eye(1 << q), qstate.H), np.eye(1 << (6 - q)))
        assert np.allclose(qstate.apply_gate(rho, q, qstate.H).data, U @ rho.data @ U.conj().T)


def test_instruction_length_checked():
    with pytest.raises(DimensionError):
        qstate.apply_local_gates(qstate.ghz_density(3), (0, 1))


def test_distribution_checks():
    with pytest.raises(InvalidDistributionError):
        qstate.check_distribution([0.5, 0.6])
    with pytest.raises(InvalidDistributionError):
        qstate.check_distribution([1.1, -0.1])


def test_sampling_respects_support():
    import random

    rng = random.Random(1)
    dist = qstate.outcome_distribution(qstate.apply_local_gates(qstate.ghz_density(3), (0, 0, 0)))
    for _ in range(200):
        assert qstate.sample_outcome(dist, rng) in GHZ3_X000_SUPPORT


# -- eigenvalues and trace distance --------------------------------------------


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        a = qstate.random_density(n, rng).data - qstate.random_density(n, rng).data
        assert np.allclose(np.sort(qstate.eigvalsh(a)), np.linalg.eigvalsh(a), atol=1e-10)


def test_trace_distance_values():
    assert qstate.trace_distance(qstate.ghz_density(3), basis("000")) == pytest.approx(TD_GHZ3_000, abs=1e-9)
    assert qstate.trace_distance(qstate.ghz_density(3), qstate.depolarize_ghz(3, 0.5)) == pytest.approx(TD_DEPOL3_HALF, abs=1e-9)
    assert qstate.ghz_distance(basis("001")) == pytest.approx(1.0, abs=1e-9)


def test_trace_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        qstate.trace_distance(qstate.ghz_density(2), qstate.ghz_density(3))


# -- documents ---------------------------------------------------------------


def test_document_round_trip(tmp_path):
    rho = qstate.depolarize_ghz(2, 0.3)
    path = tmp_path / "rho.json"
    qstate.save_state(rho, path)
    assert qstate.load_state(path) == rho
    psi = qstate.make_ghz(2)
    assert qstate.state_from_document(qstate.state_to_document(psi)) == psi


@pytest.mark.parametrize(
    "doc",
    [
        {"n": 1, "kind": "pure", "data": [[1, 0]]},
        {"n": 1, "kind": "mixed", "data": [[1, 0], [0, 0]]},
        {"n": 1, "kind": "pure", "data": [[1, 0], [0, 0]], "extra": 1},
        {"n": 1, "kind": "density", "data": [[1, 0], [0, 0], [0, 0], [0.5, 0]]},
    ],
)
def test_bad_documents(doc):
    with pytest.raises((InvalidStateError, DimensionError, ValueError)):
        qstate.state_from_document(json.loads(json.dumps(doc)))


# -- properties ----------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=3))
def test_trace_distance_metric(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (qstate.random_density(n, rng) for _ in range(3))
    ab = qstate.trace_distance(a, b)
    assert ab == pytest.approx(qstate.trace_distance(b, a), abs=1e-10)
    assert qstate.trace_distance(a, a) <= 1e-10
    assert ab <= qstate.trace_distance(a, c) + qstate.trace_distance(c, b) + 1e-8
    assert 0.0 <= ab <= 1.0


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=3))
def test_pure_state_formula(seed, n):
    rng = np.random.default_rng(seed)
    psi, phi = qstate.random_pure_state(n, rng), qstate.random_pure_state(n, rng)
    overlap = abs(np.vdot(psi.amps, phi.amps)) ** 2
    expected = math.sqrt(max(0.0, 1 - overlap))
    assert qstate.trace_distance(qstate.to_density(psi), qstate.to_density(phi)) == pytest.approx(expected, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=3))
def test_unitary_conjugation_preserves_spectrum(seed, n):
    rng = np.random.default_rng(seed)
    rho = qstate.random_density(n, rng)
    d = 1 << n
    q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    conj = q @ rho.data @ q.conj().T
    assert np.allclose(np.sort(qstate.eigvalsh(rho.data)), np.sort(qstate.eigvalsh(conj)), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=3), st.lists(st.integers(0, 1), min_size=3, max_size=3))
def test_outcome_tables_are_distributions(seed, n, x):
    rng = np.random.default_rng(seed)
    rho = qstate.random_density(n, rng)
    dist = qstate.outcome_distribution(qstate.apply_local_gates(rho, x[:n]))
    assert np.all(dist >= 0)
    assert math.fsum(dist) == pytest.approx(1.0, abs=1e-12)
