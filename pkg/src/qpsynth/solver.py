"""Homotopy (LARS/LASSO) path solver for min-L1 synthesis problems.

Solves the penalized least-squares family

    min_g  0.5 * ||R g - u||_2^2 + lam * ||g||_1

for the entire regularization path, starting from the null solution at
lam = ||R^T u||_inf and tracing breakpoints where single columns enter or
leave the active set, down to an exact solution (or a lambda floor).  The
squared-residual form has a piecewise-linear path in lam; the
(residual, l1) tradeoff frontier it traces matches the unsquared
formulation, which is what downstream consumers use.

On the active set A, the coefficients solve the equicorrelation system

    R_A^T (R_A g_A - u) = -lam * s_A,        s_A = sign(g_A),

maintained here via an incrementally updated thin QR factorization; normal
equations are avoided because the design matrices of interest are
ill-conditioned (many nearly identical columns).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .design import DesignProblem
from .errors import ExactSolutionUnavailableError, L1NotAttainedError

EXACT_PATH_RTOL = 1e-12      # path stop: residual <= rtol * ||u||
EXACT_SOLUTION_RTOL = 1e-10  # exact_solution acceptance threshold
SPARSITY_TOL = 1e-12
TIE_TOL = 1e-14
DEPENDENCE_RTOL = 1e-12      # column rejected as rank-deficient below this


class IncrementalQR:
    """Thin QR of an active column set with add/remove updates.

    Columns are added by twice-reorthogonalized Gram-Schmidt and removed by
    Givens rotations, so the factorization never has to be rebuilt as the
    active set evolves.
    """

    def __init__(self, n_rows: int):
        self.m = n_rows
        self.q = np.zeros((n_rows, 0))
        self.r = np.zeros((0, 0))

    @property
    def k(self) -> int:
        return self.q.shape[1]

    def would_be_dependent(self, col: np.ndarray, rtol: float = DEPENDENCE_RTOL) -> bool:
        w = self.q.T @ col
        resid = col - self.q @ w
        resid -= self.q @ (self.q.T @ resid)
        return np.linalg.norm(resid) <= rtol * max(np.linalg.norm(col), 1e-300)

    def add_column(self, col: np.ndarray, rtol: float = DEPENDENCE_RTOL) -> bool:
        w = self.q.T @ col
        resid = col - self.q @ w
        w2 = self.q.T @ resid
        resid -= self.q @ w2
        w += w2
        norm = np.linalg.norm(resid)
        if norm <= rtol * max(np.linalg.norm(col), 1e-300):
            return False
        k = self.k
        new_r = np.zeros((k + 1, k + 1))
        new_r[:k, :k] = self.r
        new_r[:k, k] = w
        new_r[k, k] = norm
        self.r = new_r
        self.q = np.hstack([self.q, (resid / norm)[:, None]])
        return True

    def remove_column(self, index: int) -> None:
        k = self.k
        r = np.delete(self.r, index, axis=1)
        q = self.q.copy()
        for row in range(index, k - 1):
            a, b = r[row, row], r[row + 1, row]
            rad = np.hypot(a, b)
            if rad == 0.0:
                continue
            c, s = a / rad, b / rad
            rot = np.array([[c, s], [-s, c]])
            r[[row, row + 1], row:] = rot @ r[[row, row + 1], row:]
            q[:, [row, row + 1]] = q[:, [row, row + 1]] @ rot.T
        self.r = r[: k - 1, :]
        self.q = q[:, : k - 1]

    def solve_least_squares(self, rhs: np.ndarray) -> np.ndarray:
        """argmin ||A x - rhs|| over the current columns A."""
        return _solve_upper(self.r, self.q.T @ rhs)

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (A^T A) x = rhs through the triangular factor."""
        return _solve_upper(self.r, _solve_lower_transposed(self.r, rhs))


def _solve_upper(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = r.shape[0]
    x = np.zeros(k)
    for i in range(k - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1:] @ x[i + 1:]) / r[i, i]
    return x


def _solve_lower_transposed(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve R^T x = b with R upper triangular."""
    k = r.shape[0]
    x = np.zeros(k)
    for i in range(k):
        x[i] = (b[i] - r[: i, i] @ x[: i]) / r[i, i]
    return x


@dataclass(frozen=True)
class PathBreakpoint:
    lam: float
    coeffs: np.ndarray = field(repr=False)
    residual: float
    l1_norm: float
    active: tuple[int, ...]
    note: str = ""


@dataclass
class SolutionPath:
    breakpoints: list[PathBreakpoint]
    termination: str  # exact_reached | lambda_floor | max_iterations
    problem: DesignProblem
    notes: list[str] = field(default_factory=list)

    def lambdas(self) -> np.ndarray:
        return np.array([bp.lam for bp in self.breakpoints])

    def residuals(self) -> np.ndarray:
        return np.array([bp.residual for bp in self.breakpoints])

    def l1_norms(self) -> np.ndarray:
        return np.array([bp.l1_norm for bp in self.breakpoints])


@dataclass(frozen=True)
class Solution:
    coeffs: np.ndarray = field(repr=False)
    lam: float | None
    residual: float
    l1_norm: float
    sparsity: int


def _make_solution(problem: DesignProblem, coeffs: np.ndarray, lam: float | None) -> Solution:
    coeffs = np.asarray(coeffs, dtype=float)
    residual = float(np.linalg.norm(problem.matrix @ coeffs - problem.target))
    return Solution(
        coeffs=coeffs,
        lam=lam,
        residual=residual,
        l1_norm=float(np.abs(coeffs).sum()),
        sparsity=int(np.count_nonzero(np.abs(coeffs) > SPARSITY_TOL)),
    )


def solve_path(
    problem: DesignProblem,
    lambda_floor: float = 0.0,
    max_breakpoints: int = 1000,
) -> SolutionPath:
    """Trace the full homotopy path from the null solution to exactness.

    At every breakpoint either a column whose correlation with the residual
    reaches the current penalty enters the active set, or an active
    coefficient crosses zero and leaves.  Simultaneous events within 1e-14
    are processed together, tie-broken by ascending column index and noted
    on the breakpoint.  Columns that would make the active set numerically
    rank-deficient are rejected with a note and the path continues.

    The path terminates when the residual falls below 1e-12 * ||u||
    (``exact_reached``), when lam reaches ``lambda_floor``
    (``lambda_floor``), or at ``max_breakpoints`` (``max_iterations``).
    """
    if lambda_floor < 0:
        raise ValueError("lambda_floor must be nonnegative")
    if not np.all(np.isfinite(problem.matrix)) or not np.all(np.isfinite(problem.target)):
        raise ValueError("design problem contains non-finite values")

    R = problem.matrix
    u = problem.target
    m, n = R.shape
    unorm = float(np.linalg.norm(u))
    exact_tol = EXACT_PATH_RTOL * unorm

    corr0 = R.T @ u
    lam0 = float(np.max(np.abs(corr0))) if n else 0.0
    zero = np.zeros(n)
    breakpoints = [PathBreakpoint(lam0, zero, unorm, 0.0, ())]
    if unorm <= 1e-300 or lam0 <= max(lambda_floor, 1e-300):
        termination = "exact_reached" if unorm <= exact_tol or unorm <= 1e-300 else "lambda_floor"
        return SolutionPath(breakpoints, termination, problem, [])

    qr = IncrementalQR(m)
    active: list[int] = []
    signs: list[float] = []
    excluded: set[int] = set()
    notes: list[str] = []

    def probe_entry(j: int, sign: float) -> str:
        """Classify a tentative entry without changing the active set.

        "dependent": the column is numerically in the active span.
        "inconsistent": the entering coefficient would move against its
        equicorrelation sign (a numerical artifact near drop points; in
        exact arithmetic entering coefficients always move with their
        sign).
        """
        if not qr.add_column(R[:, j]):
            return "dependent"
        b_try = qr.solve_gram(np.append(np.array(signs), sign))
        ok = b_try[-1] * sign > 0
        qr.remove_column(qr.k - 1)
        return "ok" if ok else "inconsistent"

    def admit(j: int, sign: float) -> None:
        verdict = probe_entry(j, sign)
        if verdict == "ok":
            qr.add_column(R[:, j])
            active.append(j)
            signs.append(sign)
        elif verdict == "dependent":
            excluded.add(j)
            notes.append(f"column {j} rejected: rank-deficient with active set")
        else:
            notes.append(f"column {j} entry deferred: sign-inconsistent direction")

    # initial activation: every column tied at lam0
    tied = np.nonzero(np.abs(corr0) >= lam0 - TIE_TOL * max(lam0, 1.0))[0]
    if tied.size > 1:
        notes.append(f"tie at lambda={lam0:.6e}: columns {tied.tolist()}, lowest first")
    for j in tied:
        admit(int(j), float(np.sign(corr0[j])))

    lam = lam0
    termination = None

    while termination is None:
        if not active:
            termination = "lambda_floor"
            break
        s = np.array(signs)
        cols = R[:, active]
        # one pass of iterative refinement: the triangular gram solve loses
        # kappa^2 digits on the ill-conditioned active sets seen here
        a = qr.solve_least_squares(u)
        a += qr.solve_least_squares(u - cols @ a)
        b = qr.solve_gram(s)
        b += qr.solve_gram(s - cols.T @ (cols @ b))
        r_ls = u - cols @ a
        v = cols @ b

        alpha = R.T @ r_ls
        beta = R.T @ v

        # candidate penalties where events occur (path parameter decreases)
        ceil = lam * (1 - 1e-14)
        candidates: list[tuple[float, str, int, float]] = []  # (t, kind, col, sign)
        inactive = np.ones(n, dtype=bool)
        inactive[active] = False
        for j in excluded:
            inactive[j] = False
        for j in np.nonzero(inactive)[0]:
            # c_j(t) = alpha_j + t beta_j meets +t or -t
            for sign, den in ((1.0, 1.0 - beta[j]), (-1.0, -(1.0 + beta[j]))):
                if abs(den) <= 1e-300:
                    continue
                t = alpha[j] / den
                if not (lambda_floor < t <= ceil):
                    continue
                candidates.append((t, "entry", int(j), sign))
        for pos, j in enumerate(active):
            if abs(b[pos]) <= 1e-300:
                continue
            t = a[pos] / b[pos]
            if not (lambda_floor < t <= ceil):
                continue
            # a coefficient can only cross zero if it is currently nonzero;
            # freshly entered columns otherwise alias a drop at t ~ lam
            scale = max(1.0, abs(a[pos]), lam * abs(b[pos]))
            if abs(a[pos] - lam * b[pos]) <= 1e-10 * scale:
                continue
            candidates.append((t, "drop", int(j), 0.0))

        # event selection: vet entries (rank, sign direction) before committing
        entries: list[tuple[int, float]] = []
        drops: list[int] = []
        note_parts: list[str] = []
        while candidates:
            t_best = max(t for t, _, _, _ in candidates)
            hit = [c for c in candidates if c[0] >= t_best - TIE_TOL * max(t_best, 1.0)]
            entry_hits = sorted({(j, sign) for _, kind, j, sign in hit if kind == "entry"})
            drop_hits = sorted({j for _, kind, j, _ in hit if kind == "drop"})
            if not drop_hits:
                admissible = []
                vetoed: set[tuple[int, float]] = set()
                for j, sign in entry_hits:
                    verdict = probe_entry(j, sign)
                    if verdict == "ok":
                        admissible.append((j, sign))
                    elif verdict == "dependent":
                        excluded.add(j)
                        notes.append(f"column {j} rejected: rank-deficient with active set")
                    else:
                        vetoed.add((j, sign))
                        notes.append(
                            f"column {j} entry at lambda={t_best:.6e} skipped: "
                            "sign-inconsistent direction"
                        )
                if not admissible:
                    candidates = [
                        c
                        for c in candidates
                        if not (
                            c[1] == "entry"
                            and (c[2] in excluded or (c[2], c[3]) in vetoed)
                        )
                    ]
                    continue
                entry_hits = admissible
            t_next = t_best
            entries = entry_hits
            drops = drop_hits
            break
        else:
            t_next = lambda_floor

        if len(entries) > 1:
            note_parts.append(
                f"tie: columns {[j for j, _ in entries]} enter together, lowest first"
            )

        gamma = np.zeros(n)
        gamma[active] = a - t_next * b
        for j in drops:
            gamma[j] = 0.0  # dropped coefficient is exactly zero at the breakpoint
        residual = float(np.linalg.norm(r_ls + t_next * v))

        breakpoints.append(
            PathBreakpoint(
                lam=float(t_next),
                coeffs=gamma,
                residual=residual,
                l1_norm=float(np.abs(gamma).sum()),
                active=tuple(active),
                note="; ".join(note_parts),
            )
        )
        lam = t_next

        if residual <= exact_tol:
            termination = "exact_reached"
        elif t_next <= lambda_floor + 1e-300 or (not entries and not drops):
            termination = "lambda_floor"
        elif len(breakpoints) >= max_breakpoints:
            termination = "max_iterations"
        if termination is not None:
            break

        # apply events: drops first (they free rank for new entries)
        for j in drops:
            pos = active.index(j)
            qr.remove_column(pos)
            active.pop(pos)
            signs.pop(pos)
            excluded.clear()
        for j, sign in entries:
            if j in active:
                continue
            admit(j, sign)

    return SolutionPath(breakpoints, termination, problem, notes)


def kkt_report(problem: DesignProblem, coeffs: np.ndarray, lam: float, tol: float = 1e-8):
    """First-order optimality certificate for the penalized problem.

    With c = R^T (u - R g): requires |c_l| <= lam + tol everywhere and
    c_l = lam * sign(g_l) +/- tol on the support.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    c = problem.matrix.T @ (problem.target - problem.matrix @ coeffs)
    bound_violation = float(np.max(np.abs(c)) - lam) if c.size else 0.0
    support = np.abs(coeffs) > SPARSITY_TOL
    if np.any(support):
        support_violation = float(
            np.max(np.abs(c[support] - lam * np.sign(coeffs[support])))
        )
    else:
        support_violation = 0.0
    passed = bound_violation <= tol and support_violation <= tol
    return KktReport(
        passed=bool(passed),
        lam=float(lam),
        bound_violation=bound_violation,
        support_violation=support_violation,
        worst_violation=float(max(bound_violation, support_violation)),
        tol=tol,
    )


@dataclass(frozen=True)
class KktReport:
    passed: bool
    lam: float
    bound_violation: float
    support_violation: float
    worst_violation: float
    tol: float


def exact_solution(path: SolutionPath) -> Solution:
    """Terminal minimum-L1 solution of the path, requiring near-zero residual.

    Accepts the best breakpoint if its residual is within
    1e-10 * ||u||; otherwise raises carrying the best residual achieved.
    """
    unorm = float(np.linalg.norm(path.problem.target))
    threshold = EXACT_SOLUTION_RTOL * max(unorm, 1e-300)
    best = min(path.breakpoints, key=lambda bp: (bp.residual, bp.l1_norm))
    if best.residual > threshold:
        raise ExactSolutionUnavailableError(best.residual, threshold)
    return _make_solution(path.problem, best.coeffs, best.lam)


def solution_at_l1(path: SolutionPath, target_l1: float) -> Solution:
    """Path solution with the requested L1 norm, interpolated exactly.

    Coefficients are linear in lam between breakpoints and no sign changes
    occur inside a segment, so the L1 norm is piecewise linear and each
    crossing is exact.  If several segments attain the target, the crossing
    with the smallest residual is returned.
    """
    if target_l1 < 0:
        raise ValueError("target_l1 must be nonnegative")
    bps = path.breakpoints
    best: Solution | None = None
    for left, right in zip(bps[:-1], bps[1:]):
        lo, hi = sorted((left.l1_norm, right.l1_norm))
        if not (lo - 1e-14 <= target_l1 <= hi + 1e-14):
            continue
        span = right.l1_norm - left.l1_norm
        if abs(span) < 1e-300:
            tau = 0.0
        else:
            tau = (target_l1 - left.l1_norm) / span
        tau = min(max(tau, 0.0), 1.0)
        coeffs = (1 - tau) * left.coeffs + tau * right.coeffs
        lam = (1 - tau) * left.lam + tau * right.lam
        candidate = _make_solution(path.problem, coeffs, lam)
        if best is None or candidate.residual < best.residual:
            best = candidate
    if best is None and bps:
        # degenerate single-breakpoint path
        if abs(bps[0].l1_norm - target_l1) <= 1e-14:
            return _make_solution(path.problem, bps[0].coeffs, bps[0].lam)
    if best is None:
        l1s = [bp.l1_norm for bp in bps]
        raise L1NotAttainedError(target_l1, min(l1s), max(l1s))
    return best


def interpolate_solutions(a: Solution, b: Solution, t: float, problem: DesignProblem) -> Solution:
    """Convex combination (1-t) a + t b with recomputed residual and norm."""
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError("solutions have different dimensions")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return _make_solution(problem, (1 - t) * a.coeffs + t * b.coeffs, None)


def tradeoff_curve(path: SolutionPath, samples_per_segment: int = 0) -> np.ndarray:
    """(residual, l1_norm) frontier traced by the path.

    Includes every breakpoint plus optional evenly spaced samples inside
    each segment (residuals recomputed exactly), pruned to a monotone
    staircase: L1 ascending, residual strictly decreasing.
    """
    problem = path.problem
    pts = [(bp.residual, bp.l1_norm) for bp in path.breakpoints]
    if samples_per_segment > 0:
        bps = path.breakpoints
        for left, right in zip(bps[:-1], bps[1:]):
            for i in range(1, samples_per_segment + 1):
                tau = i / (samples_per_segment + 1)
                coeffs = (1 - tau) * left.coeffs + tau * right.coeffs
                res = float(np.linalg.norm(problem.matrix @ coeffs - problem.target))
                pts.append((res, float(np.abs(coeffs).sum())))
    pts.sort(key=lambda p: (p[1], p[0]))
    pruned: list[tuple[float, float]] = []
    best_res = np.inf
    for res, l1 in pts:
        if res < best_res:
            pruned.append((res, l1))
            best_res = res
    return np.array(pruned)


def path_to_csv(path: SolutionPath, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(["breakpoint", "lambda", "residual", "l1_norm", "sparsity"])
    for i, bp in enumerate(path.breakpoints):
        sparsity = int(np.count_nonzero(np.abs(bp.coeffs) > SPARSITY_TOL))
        writer.writerow([i, repr(bp.lam), repr(bp.residual), repr(bp.l1_norm), sparsity])


def path_to_json(path: SolutionPath) -> str:
    return json.dumps(
        {
            "termination": path.termination,
            "notes": path.notes,
            "breakpoints": [
                {
                    "lambda": bp.lam,
                    "residual": bp.residual,
                    "l1_norm": bp.l1_norm,
                    "active": list(bp.active),
                    "note": bp.note,
                    "coeffs": bp.coeffs.tolist(),
                }
                for bp in path.breakpoints
            ],
        }
    )
