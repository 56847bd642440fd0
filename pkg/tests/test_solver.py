import io
import json

import numpy as np
import pytest

import qpsynth as qp
from qpsynth.design import DesignProblem, build_single_target
from qpsynth.errors import ExactSolutionUnavailableError, L1NotAttainedError
from qpsynth.libraries import pai_library
from qpsynth.solver import (
    IncrementalQR,
    exact_solution,
    interpolate_solutions,
    kkt_report,
    path_to_csv,
    path_to_json,
    solution_at_l1,
    solve_path,
    tradeoff_curve,
)


def random_problem(rng, rows, cols, labels=None):
    return DesignProblem(
        rng.normal(size=(rows, cols)),
        rng.normal(size=rows),
        labels or [f"c{i}" for i in range(cols)],
    )


def correlated_problem(rng, rows=16, cols=40, min_gap=1e-3):
    """Clusters of nearly identical columns, the regime these designs live in."""
    n_base = cols // 4
    base = rng.normal(size=(rows, n_base))
    base /= np.linalg.norm(base, axis=0)
    cols_out = []
    for i in range(cols):
        b = base[:, i % n_base]
        scale = min_gap * 10 ** rng.uniform(0, 2)
        cols_out.append(b + scale * rng.normal(size=rows))
    matrix = np.column_stack(cols_out)
    target = matrix @ rng.normal(size=cols) + 0.1 * rng.normal(size=rows)
    return DesignProblem(matrix, target, [f"c{i}" for i in range(cols)])


def test_zero_target_gives_single_breakpoint():
    problem = DesignProblem(np.eye(3), np.zeros(3), ["a", "b", "c"])
    path = solve_path(problem)
    assert len(path.breakpoints) == 1
    assert path.termination == "exact_reached"
    assert np.array_equal(path.breakpoints[0].coeffs, np.zeros(3))


def test_orthonormal_design_soft_threshold():
    problem = DesignProblem(np.eye(4), np.array([0.6, 0.0, 0.0, 0.0]), list("abcd"))
    path = solve_path(problem)
    assert path.termination == "exact_reached"
    assert len(path.breakpoints) == 2
    lam0, lam1 = path.breakpoints[0].lam, path.breakpoints[1].lam
    assert abs(lam0 - 0.6) < 1e-15 and lam1 == 0.0
    # coefficients are linear in lambda: at lambda = 0.1 the solution is the
    # soft threshold 0.6 - 0.1 = 0.5
    tau = (lam0 - 0.1) / (lam0 - lam1)
    coeffs = (1 - tau) * path.breakpoints[0].coeffs + tau * path.breakpoints[1].coeffs
    assert np.allclose(coeffs, [0.5, 0, 0, 0], atol=1e-14)
    assert kkt_report(problem, coeffs, 0.1).passed


def test_kkt_examples():
    rng = np.random.default_rng(0)
    problem = random_problem(rng, 8, 5)
    lam0 = np.max(np.abs(problem.matrix.T @ problem.target))
    assert kkt_report(problem, np.zeros(5), lam0).passed
    assert kkt_report(problem, np.zeros(5), lam0 * 2).passed
    assert not kkt_report(problem, np.zeros(5), lam0 / 2).passed


def test_kkt_certificate_sensitivity():
    problem = DesignProblem(np.eye(4), np.array([0.6, 0.0, 0.0, 0.0]), list("abcd"))
    good = np.array([0.5, 0, 0, 0.0])
    assert kkt_report(problem, good, 0.1).passed
    bad = good.copy()
    bad[0] += 1e-3
    assert not kkt_report(problem, bad, 0.1).passed


@pytest.mark.parametrize("seed", range(10))
def test_path_certificates_on_correlated_instances(seed):
    rng = np.random.default_rng(1000 + seed)
    problem = correlated_problem(rng)
    path = solve_path(problem)
    assert all(kkt_report(problem, bp.coeffs, bp.lam).passed for bp in path.breakpoints)
    lams = path.lambdas()
    assert np.all(np.diff(lams) < 0)
    assert np.all(np.diff(path.residuals()) <= 1e-12)


def test_lambda_to_zero_matches_least_squares():
    rng = np.random.default_rng(5)
    for _ in range(5):
        problem = random_problem(rng, 24, 12)
        path = solve_path(problem)
        best = min(path.breakpoints, key=lambda bp: bp.residual)
        ols, *_ = np.linalg.lstsq(problem.matrix, problem.target, rcond=None)
        assert np.allclose(best.coeffs, ols, atol=1e-8)


def test_column_permutation_equivariance():
    rng = np.random.default_rng(9)
    problem = correlated_problem(rng, rows=12, cols=20)
    path = solve_path(problem)
    best = min(path.breakpoints, key=lambda bp: (bp.residual, bp.l1_norm))

    perm = rng.permutation(20)
    permuted = DesignProblem(
        problem.matrix[:, perm],
        problem.target,
        [problem.column_labels[j] for j in perm],
    )
    path2 = solve_path(permuted)
    best2 = min(path2.breakpoints, key=lambda bp: (bp.residual, bp.l1_norm))
    back = np.zeros(20)
    back[perm] = best2.coeffs
    assert np.allclose(back, best.coeffs, atol=1e-8)
    assert abs(best2.l1_norm - best.l1_norm) < 1e-10


def test_pai_terminal_matches_three_column_oracle(pai_setup):
    """Brute-force scan over all 3-column exact solves (B=5 grid for speed)."""
    from itertools import combinations

    lib = pai_library(5, "X")
    spacing = 2 * np.pi / 32
    theta = (11 + 0.5) * spacing
    problem = build_single_target(lib, qp.rotation_gate("X", theta))
    path = solve_path(problem)
    sol = exact_solution(path)

    cols = problem.matrix
    u = problem.target
    idx = np.array(list(combinations(range(32), 3)))
    A = np.transpose(cols[:, idx], (1, 0, 2))
    G = np.einsum("bij,bik->bjk", A, A)
    rhs = np.einsum("bij,i->bj", A, u)
    gam = np.linalg.solve(G, rhs[..., None])[..., 0]
    res = np.linalg.norm(np.einsum("bij,bj->bi", A, gam) - u, axis=1)
    l1 = np.where(res <= 1e-10, np.abs(gam).sum(axis=1), np.inf)
    assert abs(sol.l1_norm - l1.min()) < 1e-10
    assert sol.sparsity == 3
    # library entry reproduction: a target equal to one column is 1-sparse
    exact_hit = build_single_target(lib, lib.entries[11].ptm_at())
    hit_sol = exact_solution(solve_path(exact_hit))
    assert hit_sol.sparsity == 1 and abs(hit_sol.l1_norm - 1.0) < 1e-12


def test_objective_beats_subgradient_oracle():
    """Random-restart subgradient descent cannot beat path breakpoints."""
    rng = np.random.default_rng(3)
    problem = random_problem(rng, 6, 8)
    path = solve_path(problem)
    R, u = problem.matrix, problem.target

    def objective(g, lam):
        return 0.5 * np.linalg.norm(R @ g - u) ** 2 + lam * np.abs(g).sum()

    for bp in path.breakpoints[1:]:
        lam = bp.lam
        best = np.inf
        for restart in range(8):
            g = rng.normal(size=8)
            step0 = 0.5
            for it in range(1, 4001):
                grad = R.T @ (R @ g - u) + lam * np.sign(g)
                g = g - step0 / np.sqrt(it) * grad
                best = min(best, objective(g, lam))
        assert objective(bp.coeffs, lam) <= best + 1e-8


def test_exact_solution_error_carries_best_residual():
    rng = np.random.default_rng(2)
    problem = random_problem(rng, 10, 2)  # overdetermined, not exactly solvable
    path = solve_path(problem)
    with pytest.raises(ExactSolutionUnavailableError) as err:
        exact_solution(path)
    best = min(bp.residual for bp in path.breakpoints)
    assert abs(err.value.best_residual - best) < 1e-15


def test_solution_at_l1_interpolation(pai_setup):
    path = pai_setup["path"]
    zero = solution_at_l1(path, 0.0)
    assert np.array_equal(zero.coeffs, np.zeros(len(zero.coeffs)))
    mid = solution_at_l1(path, 0.5)
    assert abs(mid.l1_norm - 0.5) < 1e-12
    recomputed = np.linalg.norm(
        pai_setup["problem"].matrix @ mid.coeffs - pai_setup["problem"].target
    )
    assert abs(mid.residual - recomputed) < 1e-15
    with pytest.raises(L1NotAttainedError):
        solution_at_l1(path, 100.0)
    with pytest.raises(ValueError):
        solution_at_l1(path, -0.5)


def test_interpolate_solutions_endpoints_and_convexity(pai_setup):
    problem, exact, unit = pai_setup["problem"], pai_setup["exact"], pai_setup["unit"]
    a = interpolate_solutions(unit, exact, 0.0, problem)
    assert np.array_equal(a.coeffs, unit.coeffs)
    b = interpolate_solutions(unit, exact, 1.0, problem)
    assert np.array_equal(b.coeffs, exact.coeffs)
    for t in np.linspace(0, 1, 7):
        sol = interpolate_solutions(unit, exact, float(t), problem)
        assert sol.residual <= (1 - t) * unit.residual + t * exact.residual + 1e-12
        assert sol.l1_norm <= (1 - t) * unit.l1_norm + t * exact.l1_norm + 1e-12


def test_tradeoff_curve_staircase(pai_setup):
    unorm = np.linalg.norm(pai_setup["problem"].target)
    curve = tradeoff_curve(pai_setup["path"], samples_per_segment=9)
    assert np.all(np.diff(curve[:, 0]) < 0)
    assert np.all(np.diff(curve[:, 1]) >= 0)
    assert abs(curve[0, 0] - unorm) < 1e-12 and curve[0, 1] == 0.0
    assert curve[-1, 0] < 1e-10

    single = solve_path(DesignProblem(np.eye(2), np.zeros(2), ["a", "b"]))
    pts = tradeoff_curve(single)
    assert pts.shape == (1, 2) and pts[0, 1] == 0.0

    rng = np.random.default_rng(17)
    for _ in range(5):
        path = solve_path(random_problem(rng, 10, 6))
        c = tradeoff_curve(path, samples_per_segment=5)
        assert np.all(np.diff(c[:, 0]) < 0) and np.all(np.diff(c[:, 1]) >= 0)


def test_degenerate_tie_enters_lowest_index_first():
    # duplicated column: exact tie at the top of the path
    col = np.array([1.0, 2.0, -0.5])
    col /= np.linalg.norm(col)
    matrix = np.column_stack([col, col, np.array([0.0, 0.0, 1.0])])
    problem = DesignProblem(matrix, col * 2.0, ["a", "b", "c"])
    path = solve_path(problem)
    assert any("tie" in n for n in path.notes)
    assert any("rank-deficient" in n for n in path.notes)
    sol = exact_solution(path)
    # all weight lands on the first of the duplicated pair
    assert abs(sol.coeffs[0] - 2.0) < 1e-12 and sol.coeffs[1] == 0.0


def test_path_exports(pai_setup, tmp_path):
    path = pai_setup["path"]
    buf = io.StringIO()
    path_to_csv(path, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "breakpoint,lambda,residual,l1_norm,sparsity"
    assert len(lines) == len(path.breakpoints) + 1
    data = json.loads(path_to_json(path))
    assert data["termination"] == "exact_reached"
    assert len(data["breakpoints"]) == len(path.breakpoints)
    assert len(data["breakpoints"][0]["coeffs"]) == 128


def test_incremental_qr_matches_dense_factorization():
    rng = np.random.default_rng(6)
    m = rng.normal(size=(10, 7))
    qr = IncrementalQR(10)
    for j in range(7):
        assert qr.add_column(m[:, j])
    assert np.allclose(qr.q @ qr.r, m, atol=1e-12)
    assert np.allclose(qr.q.T @ qr.q, np.eye(7), atol=1e-12)
    rhs = rng.normal(size=10)
    ref, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    assert np.allclose(qr.solve_least_squares(rhs), ref, atol=1e-10)
    s = rng.normal(size=7)
    assert np.allclose(qr.solve_gram(s), np.linalg.solve(m.T @ m, s), atol=1e-8)

    qr.remove_column(3)
    reduced = np.delete(m, 3, axis=1)
    assert np.allclose(qr.q @ qr.r, reduced, atol=1e-12)
    assert np.allclose(qr.q.T @ qr.q, np.eye(6), atol=1e-12)
    # dependent column is detected, independent one accepted
    assert not qr.add_column(reduced @ rng.normal(size=6))
    assert qr.add_column(rng.normal(size=10))


def test_solve_path_input_validation():
    problem = DesignProblem(np.eye(2), np.ones(2), ["a", "b"])
    with pytest.raises(ValueError):
        solve_path(problem, lambda_floor=-1.0)
    bad = DesignProblem(np.eye(2), np.array([np.nan, 1.0]), ["a", "b"])
    with pytest.raises(ValueError):
        solve_path(bad)


def test_lambda_floor_termination():
    rng = np.random.default_rng(21)
    problem = random_problem(rng, 12, 6)
    lam0 = np.max(np.abs(problem.matrix.T @ problem.target))
    path = solve_path(problem, lambda_floor=lam0 / 4)
    assert path.termination == "lambda_floor"
    assert path.breakpoints[-1].lam >= lam0 / 4 - 1e-12
    path2 = solve_path(problem, max_breakpoints=2)
    assert path2.termination == "max_iterations"
    assert len(path2.breakpoints) == 2
