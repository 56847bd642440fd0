"""Pauli transfer matrices of few-qubit unitary channels.

A unitary channel rho -> U rho U^dag is represented by a real matrix acting
on the coefficient vector of rho in the orthonormal Pauli basis
P_s / sqrt(2^N), with Pauli strings ordered lexicographically over
(I, X, Y, Z)^(tensor N).  In that basis the entries are

    M[i, j] = Tr[P_i U P_j U^dag] / 2^N,

the first row of M is (1, 0, ..., 0), M is orthogonal, and the Euclidean
inner product of coefficient vectors equals the Hilbert-Schmidt inner
product of the operators they represent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import DimensionMismatchError, InvalidStateError, UnitarityError

MAX_QUBITS = 3

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

UNITARITY_TOL = 1e-10
ORTHOGONALITY_TOL = 1e-12
STATE_TOL = 1e-10


def pauli_strings(n_qubits: int) -> list[str]:
    """Lexicographic Pauli-string labels, identity string first."""
    _check_n_qubits(n_qubits)
    return ["".join(p) for p in product("IXYZ", repeat=n_qubits)]


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"XZ"``."""
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, _PAULI_1Q[ch])
    return out


@lru_cache(maxsize=MAX_QUBITS)
def _pauli_stack(n_qubits: int) -> np.ndarray:
    """All 4^N Pauli matrices stacked as an array of shape (4^N, 2^N, 2^N)."""
    return np.stack([pauli_matrix(s) for s in pauli_strings(n_qubits)])


def _check_n_qubits(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(
            f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}"
        )


@dataclass(frozen=True)
class PauliTransferMatrix:
    """Real 4^N x 4^N transfer matrix of a unitary channel."""

    n_qubits: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        dim = 4**self.n_qubits
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (dim, dim):
            raise DimensionMismatchError(
                f"expected shape {(dim, dim)}, got {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return 4**self.n_qubits

    def vec(self) -> np.ndarray:
        """Column-stacked vectorization of the transfer matrix."""
        return self.entries.flatten(order="F")

    def validate(self, tol: float = ORTHOGONALITY_TOL) -> None:
        """Check the unitary-channel invariants, raising on failure."""
        first = np.zeros(self.dim)
        first[0] = 1.0
        if np.max(np.abs(self.entries[0] - first)) > tol:
            raise ValueError("first row differs from (1, 0, ..., 0)")
        gram = self.entries.T @ self.entries
        if np.max(np.abs(gram - np.eye(self.dim))) > tol:
            raise ValueError("matrix is not orthogonal within tolerance")
        if np.max(np.abs(self.entries)) > 1.0 + tol:
            raise ValueError("entries exceed [-1, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {"n_qubits": self.n_qubits, "entries": self.entries.flatten().tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "PauliTransferMatrix":
        data = json.loads(text)
        n = int(data["n_qubits"])
        dim = 4**n
        entries = np.array(data["entries"], dtype=float).reshape(dim, dim)
        out = cls(n, entries)
        out.validate(tol=1e-9)
        return out


def ptm_from_unitary(unitary: np.ndarray, n_qubits: int | None = None) -> PauliTransferMatrix:
    """Transfer matrix of the channel rho -> U rho U^dag.

    Rejects inputs whose unitarity defect ||U^dag U - I||_F exceeds 1e-10.
    """
    U = np.asarray(unitary, dtype=complex)
    if n_qubits is None:
        n_qubits = int(round(np.log2(U.shape[0])))
    _check_n_qubits(n_qubits)
    d = 2**n_qubits
    if U.shape != (d, d):
        raise DimensionMismatchError(f"expected {(d, d)} unitary, got {U.shape}")
    defect = np.linalg.norm(U.conj().T @ U - np.eye(d))
    if defect > UNITARITY_TOL:
        raise UnitarityError(defect, UNITARITY_TOL)

    paulis = _pauli_stack(n_qubits)
    # image of each basis element, then overlaps against the basis
    conj = np.einsum("ab,jbc,dc->jad", U, paulis, U.conj())
    entries = np.real(np.einsum("iba,jab->ij", np.conj(paulis).transpose(0, 2, 1), conj)) / d
    return PauliTransferMatrix(n_qubits, entries)


def rotation_unitary(axis: str, angle: float) -> np.ndarray:
    """Single-qubit unitary exp(-i * angle * P / 2) for P in {X, Y, Z}."""
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    P = _PAULI_1Q[axis]
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * P


def rotation_gate(axis: str, angle: float) -> PauliTransferMatrix:
    """Transfer matrix of the single-qubit rotation exp(-i * angle * P / 2)."""
    return ptm_from_unitary(rotation_unitary(axis, angle), n_qubits=1)


def identity_ptm(n_qubits: int) -> PauliTransferMatrix:
    _check_n_qubits(n_qubits)
    return PauliTransferMatrix(n_qubits, np.eye(4**n_qubits))


def compose(a: PauliTransferMatrix, b: PauliTransferMatrix) -> PauliTransferMatrix:
    """Channel composition: ``b`` applied first, then ``a``."""
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(
            f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}"
        )
    return PauliTransferMatrix(a.n_qubits, a.entries @ b.entries)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, PauliTransferMatrix):
        return x.vec()
    return np.asarray(x, dtype=float).ravel(order="F")


def hs_distance(a, b) -> float:
    """Hilbert-Schmidt distance: Euclidean norm of the vectorized difference.

    Accepts transfer matrices or already-vectorized processes.  In the
    orthonormal Pauli basis this equals the Frobenius distance between the
    process matrices.
    """
    va, vb = _as_vector(a), _as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"shapes differ: {va.shape} vs {vb.shape}")
    return float(np.linalg.norm(va - vb))


def state_to_coeffs(rho: np.ndarray, n_qubits: int) -> np.ndarray:
    """Coefficients of a Hermitian operator in the orthonormal Pauli basis."""
    paulis = _pauli_stack(n_qubits)
    scale = np.sqrt(2.0**n_qubits)
    return np.real(np.einsum("jab,ba->j", paulis, np.asarray(rho, dtype=complex))) / scale


def coeffs_to_state(coeffs: np.ndarray, n_qubits: int) -> np.ndarray:
    """Inverse of :func:`state_to_coeffs`."""
    paulis = _pauli_stack(n_qubits)
    scale = np.sqrt(2.0**n_qubits)
    return np.einsum("j,jab->ab", np.asarray(coeffs, dtype=float), paulis) / scale


def validate_density_matrix(rho: np.ndarray, n_qubits: int, tol: float = STATE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    d = 2**n_qubits
    if rho.shape != (d, d):
        raise DimensionMismatchError(f"expected {(d, d)} state, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidStateError("state is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > tol or abs(np.trace(rho).imag) > tol:
        raise InvalidStateError("state trace differs from 1")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -tol:
        raise InvalidStateError(f"state has negative eigenvalue {evals.min():.3e}")
    return rho


def apply_to_state(m: PauliTransferMatrix, rho: np.ndarray) -> np.ndarray:
    """Apply a unitary channel to a density matrix."""
    rho = validate_density_matrix(rho, m.n_qubits)
    coeffs = state_to_coeffs(rho, m.n_qubits)
    return coeffs_to_state(m.entries @ coeffs, m.n_qubits)


def unitary_from_ptm(m: PauliTransferMatrix) -> np.ndarray:
    """Reconstruct a single-qubit unitary (up to global phase) from its PTM.

    Uses the quaternion of the Bloch-sphere rotation encoded in the lower
    3x3 block.
    """
    if m.n_qubits != 1:
        raise ValueError("reconstruction implemented for one qubit only")
    R = m.entries[1:, 1:]
    # quaternion (w, x, y, z) of the rotation matrix, robust branch selection
    t = np.trace(R)
    candidates = np.array([1.0 + t, 1.0 + 2 * R[0, 0] - t, 1.0 + 2 * R[1, 1] - t, 1.0 + 2 * R[2, 2] - t])
    k = int(np.argmax(candidates))
    q = np.empty(4)
    if k == 0:
        w = 0.5 * np.sqrt(max(candidates[0], 0.0))
        q[:] = (w, (R[2, 1] - R[1, 2]) / (4 * w), (R[0, 2] - R[2, 0]) / (4 * w), (R[1, 0] - R[0, 1]) / (4 * w))
    else:
        i = k - 1
        j, l = (i + 1) % 3, (i + 2) % 3
        s = 0.5 * np.sqrt(max(candidates[k], 0.0))
        axis = np.empty(3)
        axis[i] = s
        axis[j] = (R[j, i] + R[i, j]) / (4 * s)
        axis[l] = (R[l, i] + R[i, l]) / (4 * s)
        q[:] = ((R[l, j] - R[j, l]) / (4 * s), *axis)
    w, x, y, z = q / np.linalg.norm(q)
    # U = w I - i (x X + y Y + z Z)
    return w * np.eye(2) - 1j * (
        x * _PAULI_1Q["X"] + y * _PAULI_1Q["Y"] + z * _PAULI_1Q["Z"]
    )


def density_matrix_to_json(rho: np.ndarray) -> str:
    """Serialize as interleaved real/imag row-major values."""
    rho = np.asarray(rho, dtype=complex)
    flat = rho.flatten()
    interleaved = np.empty(2 * flat.size)
    interleaved[0::2] = flat.real
    interleaved[1::2] = flat.imag
    return json.dumps({"dim": rho.shape[0], "values": interleaved.tolist()})


def density_matrix_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    d = int(data["dim"])
    values = np.array(data["values"], dtype=float)
    return (values[0::2] + 1j * values[1::2]).reshape(d, d)


class PauliObservable:
    """Hermitian observable given by real coefficients on Pauli strings."""

    def __init__(self, n_qubits: int, coefficients: dict[str, float]):
        _check_n_qubits(n_qubits)
        labels = pauli_strings(n_qubits)
        index = {s: i for i, s in enumerate(labels)}
        vec = np.zeros(4**n_qubits)
        for label, value in coefficients.items():
            if label not in index:
                raise ValueError(f"unknown Pauli string {label!r} for {n_qubits} qubit(s)")
            vec[index[label]] = float(value)
        self.n_qubits = n_qubits
        self.pauli_coefficients = vec
        self._matrix = np.einsum("j,jab->ab", vec, _pauli_stack(n_qubits))
        self.infinity_norm = float(np.max(np.abs(np.linalg.eigvalsh(self._matrix))))

    def matrix(self) -> np.ndarray:
        return self._matrix.copy()

    def coeff_vector(self) -> np.ndarray:
        """Coefficients in the orthonormal basis, so that Tr[O rho] is a dot product."""
        return self.pauli_coefficients * np.sqrt(2.0**self.n_qubits)

    def eigenbasis(self, decimals: int = 12):
        """Distinct eigenvalues with projector coefficient vectors.

        Returns ``(eigenvalues, projector_coeffs)`` where row b of
        ``projector_coeffs`` represents the projector onto the eigenspace of
        ``eigenvalues[b]`` in the orthonormal Pauli basis.
        """
        evals, evecs = np.linalg.eigh(self._matrix)
        rounded = np.round(evals, decimals)
        distinct = np.unique(rounded)
        projectors = []
        for lam in distinct:
            cols = evecs[:, rounded == lam]
            proj = cols @ cols.conj().T
            projectors.append(state_to_coeffs(proj, self.n_qubits))
        return distinct.astype(float), np.array(projectors)
