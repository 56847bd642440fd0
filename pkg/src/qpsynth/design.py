"""Assembly of the underdetermined linear system for synthesis problems.

Columns are vectorized transfer matrices of library entries; for broadband
problems each column stacks the entry's processes over a drift grid, and
the target stacks copies of the desired process (or identity blocks outside
a band for band-selective targets).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .libraries import GateLibrary
from .ptm import PauliTransferMatrix, identity_ptm

_BINARY_MAGIC = b"QPSDMX01"
_DTYPE_BINARY64 = 1
COLUMN_NORM_TOL = 1e-10


@dataclass
class DesignProblem:
    """Dense design matrix, target vector and column bookkeeping."""

    matrix: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    column_labels: list[str]
    offset_grid: np.ndarray | None = None
    n_qubits: int = 1

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=float)
        self.target = np.ascontiguousarray(self.target, dtype=float)
        rows, cols = self.matrix.shape
        if self.target.shape != (rows,):
            raise DimensionMismatchError(
                f"target length {self.target.shape} does not match {rows} rows"
            )
        if len(self.column_labels) != cols:
            raise DimensionMismatchError(
                f"{len(self.column_labels)} labels for {cols} columns"
            )

    @property
    def n_offsets(self) -> int:
        return 1 if self.offset_grid is None else int(np.size(self.offset_grid))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "column_labels": self.column_labels,
                "offset_grid": None if self.offset_grid is None else np.asarray(self.offset_grid).tolist(),
                "target": self.target.tolist(),
                "matrix": self.matrix.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DesignProblem":
        data = json.loads(text)
        grid = data.get("offset_grid")
        return cls(
            matrix=np.array(data["matrix"], dtype=float),
            target=np.array(data["target"], dtype=float),
            column_labels=list(data["column_labels"]),
            offset_grid=None if grid is None else np.array(grid, dtype=float),
            n_qubits=int(data.get("n_qubits", 1)),
        )


def matrix_to_binary(matrix: np.ndarray, path: str) -> None:
    """Write a dense matrix as column-major binary64 with a 32-byte header."""
    matrix = np.asarray(matrix, dtype=np.float64)
    header = struct.pack(
        "<8sQQQ", _BINARY_MAGIC, matrix.shape[0], matrix.shape[1], _DTYPE_BINARY64
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(matrix.flatten(order="F").tobytes())


def matrix_from_binary(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, rows, cols, dtype = struct.unpack("<8sQQQ", header)
        if magic != _BINARY_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if dtype != _DTYPE_BINARY64:
            raise ValueError(f"unsupported dtype code {dtype}")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype=np.float64)
    return data.reshape((rows, cols), order="F").copy()


def _column(entry, grid) -> np.ndarray:
    return np.concatenate([entry.ptm_at(d).vec() for d in grid])


def _check_column_norms(matrix: np.ndarray, n_qubits: int, q: int) -> None:
    # unitary-channel columns all have Frobenius norm sqrt(q) * 2^N
    expected = np.sqrt(q) * 2.0**n_qubits
    norms = np.linalg.norm(matrix, axis=0)
    worst = float(np.max(np.abs(norms - expected)))
    if worst > COLUMN_NORM_TOL:
        raise ValueError(
            f"column norms deviate from {expected} by {worst:.3e}; "
            "library entries are not unitary channels"
        )


def build_single_target(library: GateLibrary, desired: PauliTransferMatrix) -> DesignProblem:
    """Design with one block: columns vec(entry), target vec(desired)."""
    if library.offset_grid is not None:
        raise ValueError("library carries an offset grid; use build_broadband")
    if desired.n_qubits != library.n_qubits:
        raise DimensionMismatchError(
            f"target acts on {desired.n_qubits} qubit(s), library on {library.n_qubits}"
        )
    grid = [0.0]
    matrix = np.column_stack([_column(e, grid) for e in library.entries])
    _check_column_norms(matrix, library.n_qubits, 1)
    return DesignProblem(
        matrix=matrix,
        target=desired.vec(),
        column_labels=library.labels(),
        offset_grid=None,
        n_qubits=library.n_qubits,
    )


def build_broadband(library: GateLibrary, desired: PauliTransferMatrix) -> DesignProblem:
    """Stack every entry's process over the library's drift grid.

    The target is the same desired process repeated once per grid point, so
    any exact solution implements the gate at all drifts simultaneously.
    """
    if library.offset_grid is None:
        raise ValueError("library has no offset grid; use build_single_target")
    if desired.n_qubits != library.n_qubits:
        raise DimensionMismatchError(
            f"target acts on {desired.n_qubits} qubit(s), library on {library.n_qubits}"
        )
    grid = library.offset_grid
    matrix = np.column_stack([_column(e, grid) for e in library.entries])
    _check_column_norms(matrix, library.n_qubits, grid.size)
    return DesignProblem(
        matrix=matrix,
        target=np.tile(desired.vec(), grid.size),
        column_labels=library.labels(),
        offset_grid=grid.copy(),
        n_qubits=library.n_qubits,
    )


def build_band_selective(
    library: GateLibrary, desired: PauliTransferMatrix, band: float
) -> DesignProblem:
    """Broadband design whose target is the identity outside |d| <= band."""
    problem = build_broadband(library, desired)
    grid = problem.offset_grid
    if band < 0:
        raise ValueError("band halfwidth must be nonnegative")
    if band > np.max(np.abs(grid)):
        raise ValueError(
            f"band [{-band}, {band}] exceeds the grid range "
            f"[{grid.min()}, {grid.max()}]"
        )
    inside = np.abs(grid) <= band
    if not np.any(inside):
        raise ValueError(f"band [{-band}, {band}] contains no grid points")
    ident = identity_ptm(library.n_qubits).vec()
    desired_vec = desired.vec()
    blocks = [desired_vec if flag else ident for flag in inside]
    problem.target = np.concatenate(blocks)
    return problem


@dataclass(frozen=True)
class DesignDiagnostics:
    singular_values: np.ndarray
    numerical_rank: int
    condition_number: float
    min_column_distance: float
    column_norms: np.ndarray


def diagnostics(problem: DesignProblem, rank_tol: float = 1e-10) -> DesignDiagnostics:
    """Conditioning report: spectrum, rank, and column collinearity.

    The numerical rank counts singular values above ``rank_tol`` times the
    largest one; the minimal pairwise column distance exposes the
    near-collinear columns these designs are built from.
    """
    sv = np.linalg.svd(problem.matrix, compute_uv=False)
    rank = int(np.count_nonzero(sv > rank_tol * sv[0])) if sv.size else 0
    smallest_kept = sv[rank - 1] if rank else 0.0
    cond = float(sv[0] / smallest_kept) if rank else np.inf
    gram = problem.matrix.T @ problem.matrix
    sq_norms = np.diag(gram)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2 * gram
    np.fill_diagonal(d2, np.inf)
    min_dist = float(np.sqrt(max(d2.min(), 0.0))) if d2.size > 1 else np.inf
    return DesignDiagnostics(
        singular_values=sv,
        numerical_rank=rank,
        condition_number=cond,
        min_column_distance=min_dist,
        column_norms=np.sqrt(sq_norms),
    )
