import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qpsynth as qp
from qpsynth.errors import DimensionMismatchError, InvalidStateError, UnitarityError
from qpsynth.ptm import (
    PauliObservable,
    PauliTransferMatrix,
    coeffs_to_state,
    density_matrix_from_json,
    density_matrix_to_json,
    pauli_matrix,
    pauli_strings,
    state_to_coeffs,
)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def reference_ptm(unitary):
    """Independent oracle: entrywise trace formula with dense Pauli matrices."""
    n = int(round(np.log2(unitary.shape[0])))
    labels = pauli_strings(n)
    out = np.empty((4**n, 4**n))
    for i, si in enumerate(labels):
        for j, sj in enumerate(labels):
            out[i, j] = np.real(
                np.trace(pauli_matrix(si) @ unitary @ pauli_matrix(sj) @ unitary.conj().T)
            ) / 2**n
    return out


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_identity_ptm_is_identity():
    assert np.array_equal(qp.identity_ptm(1).entries, np.eye(4))
    m = qp.ptm_from_unitary(np.eye(2))
    assert np.allclose(m.entries, np.eye(4), atol=1e-15)


def test_phase_gate_ptm_matches_block_form():
    s = qp.rotation_gate("Z", np.pi / 2)
    expected = np.array(
        [[1, 0, 0, 0], [0, 0, -1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float
    )
    assert np.allclose(s.entries, expected, atol=1e-14)
    # X -> Y, Y -> -X, Z -> Z
    assert np.allclose(s.entries @ np.array([0, 1, 0, 0.0]), [0, 0, 1, 0], atol=1e-14)
    assert np.allclose(s.entries @ np.array([0, 0, 1, 0.0]), [0, -1, 0, 0], atol=1e-14)


def test_hadamard_swaps_x_z_and_negates_y():
    m = qp.ptm_from_unitary(H)
    assert np.allclose(m.entries, reference_ptm(H), atol=1e-13)
    assert np.allclose(m.entries @ np.array([0, 1, 0, 0.0]), [0, 0, 0, 1], atol=1e-14)
    assert np.allclose(m.entries @ np.array([0, 0, 0, 1.0]), [0, 1, 0, 0], atol=1e-14)
    assert np.allclose(m.entries @ np.array([0, 0, 1, 0.0]), [0, 0, -1, 0], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_ptm_matches_reference_oracle(n):
    rng = np.random.default_rng(41 + n)
    u = random_unitary(rng, 2**n)
    assert np.allclose(qp.ptm_from_unitary(u).entries, reference_ptm(u), atol=1e-12)


def test_rotation_gate_examples():
    assert np.allclose(qp.rotation_gate("Z", 0.0).entries, np.eye(4), atol=1e-15)
    assert np.allclose(
        qp.rotation_gate("Z", np.pi).entries, np.diag([1.0, -1, -1, 1]), atol=1e-14
    )
    rx = qp.rotation_gate("X", np.pi / 2)
    assert np.allclose(rx.entries @ np.array([0, 0, 1, 0.0]), [0, 0, 0, 1], atol=1e-14)
    assert np.allclose(rx.entries @ np.array([0, 0, 0, 1.0]), [0, 0, -1, 0], atol=1e-14)
    assert np.allclose(rx.entries @ np.array([0, 1, 0, 0.0]), [0, 1, 0, 0], atol=1e-14)
    with pytest.raises(ValueError):
        qp.rotation_gate("Q", 0.1)
    with pytest.raises(ValueError):
        qp.rotation_gate("X", np.inf)


def test_compose_examples():
    rng = np.random.default_rng(7)
    m = qp.ptm_from_unitary(random_unitary(rng, 2))
    assert np.allclose(qp.compose(m, qp.identity_ptm(1)).entries, m.entries)
    a, b = 0.731, -1.384
    lhs = qp.compose(qp.rotation_gate("Z", a), qp.rotation_gate("Z", b))
    assert np.allclose(lhs.entries, qp.rotation_gate("Z", a + b).entries, atol=1e-12)
    h = qp.ptm_from_unitary(H)
    assert np.allclose(qp.compose(h, h).entries, np.eye(4), atol=1e-14)


def test_compose_rejects_mixed_sizes():
    rng = np.random.default_rng(3)
    a = qp.ptm_from_unitary(random_unitary(rng, 2))
    b = qp.ptm_from_unitary(random_unitary(rng, 4))
    with pytest.raises(DimensionMismatchError):
        qp.compose(a, b)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_ptm_homomorphism_and_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    u = random_unitary(rng, 2**n)
    v = random_unitary(rng, 2**n)
    mu, mv = qp.ptm_from_unitary(u), qp.ptm_from_unitary(v)
    prod = qp.ptm_from_unitary(u @ v)
    assert np.allclose(prod.entries, qp.compose(mu, mv).entries, atol=1e-12)
    mu.validate()
    prod.validate()
    # global phase invariance (up to the rounding of the phase product)
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
    assert np.allclose(qp.ptm_from_unitary(phase * u).entries, mu.entries, atol=1e-13)


def test_ptm_rejects_nonunitary():
    bad = np.array([[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(UnitarityError) as err:
        qp.ptm_from_unitary(bad)
    assert err.value.deviation > 1e-10


def test_hs_distance_examples():
    m = qp.rotation_gate("Z", 0.3)
    assert qp.hs_distance(m, m) == 0.0
    d = qp.hs_distance(qp.identity_ptm(1), qp.rotation_gate("Z", np.pi))
    assert abs(d - 2 * np.sqrt(2)) < 1e-12
    theta, delta = 0.81, 1e-3
    d2 = qp.hs_distance(qp.rotation_gate("Z", theta), qp.rotation_gate("Z", theta + delta))
    assert abs(d2 - 2 * abs(np.sin(delta / 2)) * np.sqrt(2)) < 1e-9
    with pytest.raises(DimensionMismatchError):
        qp.hs_distance(qp.identity_ptm(1), qp.identity_ptm(2))
    # accepts raw vectorized processes too
    assert qp.hs_distance(m.vec(), m) == 0.0


def test_apply_to_state():
    rho = np.diag([0.5, 0.5]).astype(complex)
    assert np.allclose(qp.apply_to_state(qp.identity_ptm(1), rho), rho)
    # excitation of a z-polarized state lands on the y axis
    rho_z = np.array([[0.9, 0], [0, 0.1]], dtype=complex)
    out = qp.apply_to_state(qp.rotation_gate("X", np.pi / 2), rho_z)
    coeffs = state_to_coeffs(out, 1)
    assert abs(coeffs[3]) < 1e-12 and abs(coeffs[1]) < 1e-12
    assert abs(abs(coeffs[2]) - abs(state_to_coeffs(rho_z, 1)[3])) < 1e-12
    zero = np.diag([1.0, 0.0]).astype(complex)
    plus = qp.apply_to_state(qp.ptm_from_unitary(H), zero)
    assert np.allclose(plus, np.full((2, 2), 0.5), atol=1e-13)


def test_apply_to_state_preserves_spectrum_and_trace():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    m = qp.ptm_from_unitary(random_unitary(rng, 2))
    out = qp.apply_to_state(m, rho)
    assert abs(np.trace(out).real - 1.0) < 1e-12
    assert np.allclose(
        np.sort(np.linalg.eigvalsh(out)), np.sort(np.linalg.eigvalsh(rho)), atol=1e-12
    )


def test_apply_to_state_rejects_invalid_states():
    m = qp.identity_ptm(1)
    with pytest.raises(InvalidStateError):
        qp.apply_to_state(m, np.array([[1.0, 0.2], [0.0, 0.0]]))
    with pytest.raises(InvalidStateError):
        qp.apply_to_state(m, np.diag([0.7, 0.7]))
    with pytest.raises(InvalidStateError):
        qp.apply_to_state(m, np.diag([1.5, -0.5]))


def test_trace_contraction_consistency():
    rng = np.random.default_rng(5)
    m = qp.ptm_from_unitary(random_unitary(rng, 2))
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    obs = PauliObservable(1, {"X": 0.3, "Y": -1.1, "Z": 0.4, "I": 0.2})
    lhs = np.trace(obs.matrix() @ qp.apply_to_state(m, rho)).real
    rhs = obs.coeff_vector() @ (m.entries @ state_to_coeffs(rho, 1))
    assert abs(lhs - rhs) < 1e-12


def test_state_coeff_round_trip():
    rng = np.random.default_rng(19)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    herm = a + a.conj().T
    back = coeffs_to_state(state_to_coeffs(herm, 2), 2)
    assert np.allclose(back, herm, atol=1e-12)


def test_ptm_json_round_trip():
    m = qp.rotation_gate("Y", 1.234)
    again = PauliTransferMatrix.from_json(m.to_json())
    assert again.n_qubits == 1
    assert np.allclose(again.entries, m.entries, atol=1e-15)


def test_density_matrix_json_round_trip():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    again = density_matrix_from_json(density_matrix_to_json(rho))
    assert np.array_equal(again, rho)


def test_unitary_from_ptm_round_trip():
    rng = np.random.default_rng(23)
    for _ in range(20):
        u = random_unitary(rng, 2)
        m = qp.ptm_from_unitary(u)
        u2 = qp.unitary_from_ptm(m)
        assert np.allclose(qp.ptm_from_unitary(u2).entries, m.entries, atol=1e-10)


def test_pauli_observable():
    obs = PauliObservable(1, {"Z": 1.0})
    assert np.array_equal(obs.matrix(), np.diag([1.0 + 0j, -1.0]))
    assert obs.infinity_norm == 1.0
    evals, projs = obs.eigenbasis()
    assert np.array_equal(evals, [-1.0, 1.0])
    # projectors resolve the identity
    total = coeffs_to_state(projs.sum(axis=0), 1)
    assert np.allclose(total, np.eye(2), atol=1e-12)
    mixed = PauliObservable(1, {"X": 0.6, "Z": 0.8})
    assert abs(mixed.infinity_norm - 1.0) < 1e-12
    with pytest.raises(ValueError):
        PauliObservable(1, {"XX": 1.0})
