"""Shared fixtures: the expensive pipeline artifacts are built once."""

import numpy as np
import pytest

import qpsynth as qp
from qpsynth.design import build_broadband, build_single_target
from qpsynth.libraries import (
    append_clifford_recovery,
    build_pulse_library,
    enumerate_clifford_t,
    pai_library,
)
from qpsynth.solver import exact_solution, solution_at_l1, solve_path

PAI_BITS = 7
PAI_K = 20
PAI_SPACING = 2 * np.pi / 2**PAI_BITS
PAI_THETA_MIDWAY = (PAI_K + 0.5) * PAI_SPACING

CT_THETA = 0.234234
CT_BUDGET = 8
CT_EPSILON = 0.5

BROADBAND_GRID = np.linspace(-2.0, 2.0, 7)
BROADBAND_PULSES = 20


@pytest.fixture(scope="session")
def pai_setup():
    library = pai_library(PAI_BITS, "X")
    desired = qp.rotation_gate("X", PAI_THETA_MIDWAY)
    problem = build_single_target(library, desired)
    path = solve_path(problem)
    return {
        "library": library,
        "desired": desired,
        "problem": problem,
        "path": path,
        "exact": exact_solution(path),
        "unit": solution_at_l1(path, 1.0),
    }


@pytest.fixture(scope="session")
def clifford_t_setup():
    base = enumerate_clifford_t(CT_THETA, CT_BUDGET, CT_EPSILON, max_entries=20)
    library = append_clifford_recovery(base)
    desired = qp.rotation_gate("Z", CT_THETA)
    problem = build_single_target(library, desired)
    path = solve_path(problem)
    return {
        "base": base,
        "library": library,
        "desired": desired,
        "problem": problem,
        "path": path,
        "exact": exact_solution(path),
    }


@pytest.fixture(scope="session")
def broadband_setup():
    desired = qp.rotation_gate("X", np.pi / 2)
    library = build_pulse_library(
        desired,
        n_pulses=BROADBAND_PULSES,
        offsets=BROADBAND_GRID,
        seed=0,
        max_iterations=2000,
    )
    problem = build_broadband(library, desired)
    path = solve_path(problem, max_breakpoints=3000)
    return {
        "library": library,
        "desired": desired,
        "problem": problem,
        "path": path,
        "exact": exact_solution(path),
        "unit": solution_at_l1(path, 1.0),
    }
