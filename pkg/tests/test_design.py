import numpy as np
import pytest

import qpsynth as qp
from qpsynth.design import (
    DesignProblem,
    build_band_selective,
    build_broadband,
    build_single_target,
    diagnostics,
    matrix_from_binary,
    matrix_to_binary,
)
from qpsynth.errors import DimensionMismatchError
from qpsynth.libraries import build_pulse_library, pai_library


@pytest.fixture(scope="module")
def small_pulse_library():
    return build_pulse_library(
        qp.rotation_gate("X", np.pi / 2),
        n_pulses=2,
        offsets=np.linspace(-1, 1, 3),
        seed=0,
        max_iterations=60,
    )


def three_gate_library():
    lib = pai_library(2, "X")
    lib.entries = lib.entries[:3]
    return lib


def test_single_target_shape_and_column_reproduction():
    lib = three_gate_library()
    desired = lib.entries[1].ptm_at()
    problem = build_single_target(lib, desired)
    assert problem.matrix.shape == (16, 3)
    assert problem.column_labels == lib.labels()
    coeffs = np.array([0.0, 1.0, 0.0])
    assert np.linalg.norm(problem.matrix @ coeffs - problem.target) < 1e-14


def test_pai_design_shape():
    problem = build_single_target(pai_library(7, "X"), qp.rotation_gate("X", 0.3))
    assert problem.matrix.shape == (16, 128)


def test_column_norms_are_uniform(small_pulse_library):
    desired = qp.rotation_gate("X", np.pi / 2)
    problem = build_broadband(small_pulse_library, desired)
    q = 3
    norms = np.linalg.norm(problem.matrix, axis=0)
    assert np.max(np.abs(norms - np.sqrt(q) * 2.0)) < 1e-10


def test_broadband_shape_and_stacking(small_pulse_library):
    desired = qp.rotation_gate("X", np.pi / 2)
    problem = build_broadband(small_pulse_library, desired)
    assert problem.matrix.shape == (48, len(small_pulse_library))
    assert np.array_equal(problem.target, np.tile(desired.vec(), 3))
    entry = small_pulse_library.entries[0]
    col = problem.matrix[:, 0]
    expected = np.concatenate(
        [entry.ptm_at(d).vec() for d in small_pulse_library.offset_grid]
    )
    assert np.array_equal(col, expected)


def test_build_mode_guards(small_pulse_library):
    desired = qp.rotation_gate("X", np.pi / 2)
    with pytest.raises(ValueError):
        build_single_target(small_pulse_library, desired)
    with pytest.raises(ValueError):
        build_broadband(pai_library(3, "X"), desired)


def test_band_selective_targets(small_pulse_library):
    desired = qp.rotation_gate("X", np.pi / 2)
    broadband = build_broadband(small_pulse_library, desired)
    wide = build_band_selective(small_pulse_library, desired, band=1.0)
    assert np.array_equal(wide.target, broadband.target)

    narrow = build_band_selective(small_pulse_library, desired, band=0.0)
    ident = qp.identity_ptm(1).vec()
    assert np.array_equal(narrow.target[:16], ident)
    assert np.array_equal(narrow.target[16:32], desired.vec())
    assert np.array_equal(narrow.target[32:], ident)
    # blocks outside the band are the only difference
    assert np.array_equal(narrow.target[16:32], broadband.target[16:32])

    with pytest.raises(ValueError):
        build_band_selective(small_pulse_library, desired, band=3.0)
    lib = build_pulse_library(
        desired, 1, offsets=np.array([-2.0, -1.0, 1.0, 2.0]), seed=0, max_iterations=20
    )
    with pytest.raises(ValueError):
        build_band_selective(lib, desired, band=0.5)


def test_band_selective_five_point_grid():
    desired = qp.rotation_gate("X", np.pi / 2)
    lib = build_pulse_library(
        desired, 1, offsets=np.linspace(-2, 2, 5), seed=1, max_iterations=20
    )
    problem = build_band_selective(lib, desired, band=1.0)
    ident = qp.identity_ptm(1).vec()
    blocks = problem.target.reshape(5, 16)
    assert np.array_equal(blocks[0], ident)
    assert np.array_equal(blocks[4], ident)
    for i in (1, 2, 3):
        assert np.array_equal(blocks[i], desired.vec())


def test_diagnostics_identity_design():
    problem = DesignProblem(np.eye(6), np.ones(6), [f"c{i}" for i in range(6)])
    report = diagnostics(problem)
    assert report.numerical_rank == 6
    assert abs(report.condition_number - 1.0) < 1e-12


def test_diagnostics_pai_near_collinearity():
    problem = build_single_target(pai_library(7, "X"), qp.rotation_gate("X", 0.3))
    report = diagnostics(problem)
    # adjacent notches are 2 sqrt(2) sin(pi/128) apart
    expected = 2 * np.sqrt(2) * np.sin(np.pi / 128)
    assert report.min_column_distance < 0.1
    assert abs(report.min_column_distance - expected) < 1e-10
    assert report.numerical_rank == 3


def test_problem_json_round_trip(small_pulse_library):
    problem = build_broadband(small_pulse_library, qp.rotation_gate("X", np.pi / 2))
    again = DesignProblem.from_json(problem.to_json())
    assert np.array_equal(again.matrix, problem.matrix)
    assert np.array_equal(again.target, problem.target)
    assert again.column_labels == problem.column_labels
    assert np.array_equal(again.offset_grid, problem.offset_grid)


def test_matrix_binary_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    m = rng.normal(size=(9, 5))
    path = tmp_path / "design.bin"
    matrix_to_binary(m, str(path))
    assert path.stat().st_size == 32 + 9 * 5 * 8
    again = matrix_from_binary(str(path))
    assert np.array_equal(again, m)
    # corrupt magic is rejected
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    bad = tmp_path / "bad.bin"
    bad.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        matrix_from_binary(str(bad))


def test_problem_validation():
    with pytest.raises(DimensionMismatchError):
        DesignProblem(np.eye(4), np.ones(3), ["a"] * 4)
    with pytest.raises(DimensionMismatchError):
        DesignProblem(np.eye(4), np.ones(4), ["a", "b"])
