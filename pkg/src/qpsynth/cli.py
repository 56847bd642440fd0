"""Batch command-line front end.

Subcommands build gate libraries, assemble and solve the synthesis
problems, validate solutions statistically, and write one artifact bundle
per run: a directory with manifest.json, library.json, path.csv (plus a
JSON sidecar with the full coefficient vectors), solutions.json and
run-specific CSVs.  All randomness flows from the single --seed flag and
every bundle records enough configuration to re-run bit-identically.

Exits nonzero when any stage fails or any internal certificate (KKT
checks, statistical validations) does not pass.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import ACTIVE_BACKEND
from .design import (
    DesignProblem,
    build_band_selective,
    build_broadband,
    build_single_target,
    diagnostics,
    matrix_to_binary,
)
from .errors import (
    ExactSolutionUnavailableError,
    L1NotAttainedError,
    QpsynthError,
)
from .libraries import (
    GateLibrary,
    append_clifford_recovery,
    build_pulse_library,
    clifford_recovery_library,
    enumerate_clifford_t,
    pai_library,
)
from .ptm import PauliObservable, hs_distance, rotation_gate
from .sampler import (
    estimate_expectation,
    nmr_estimate_signal,
    nmr_ideal_signal,
    scheme_from_coeffs,
    shot_bound,
)
from .solver import (
    Solution,
    exact_solution,
    interpolate_solutions,
    kkt_report,
    path_to_csv,
    path_to_json,
    solution_at_l1,
    solve_path,
    tradeoff_curve,
)


def _write(outdir: Path, name: str, text: str) -> str:
    path = outdir / name
    path.write_text(text)
    return name


def _solution_record(sol: Solution, extra: dict | None = None) -> dict:
    rec = {
        "coeffs": sol.coeffs.tolist(),
        "lambda": sol.lam,
        "residual": sol.residual,
        "l1_norm": sol.l1_norm,
        "sparsity": sol.sparsity,
    }
    if extra:
        rec.update(extra)
    return rec


def _check_kkt(path, certificates: dict) -> None:
    """Optimality certificates for every breakpoint.

    Certifies dual feasibility relative to the problem's correlation scale
    lam0 = ||R^T u||_inf (equivalently absolute 1e-8 on unit-scale
    problems); rank-deficient designs at double precision cannot do better.
    """
    worst = 0.0
    for bp in path.breakpoints:
        report = kkt_report(path.problem, bp.coeffs, bp.lam)
        worst = max(worst, report.worst_violation)
    lam0 = max(path.breakpoints[0].lam, 1.0)
    lams = path.lambdas()
    monotone = bool(np.all(np.diff(lams) < 0)) if len(lams) > 1 else True
    residuals = path.residuals()
    nonincreasing = bool(np.all(np.diff(residuals) <= 1e-12)) if len(residuals) > 1 else True
    certificates["kkt_all_breakpoints"] = bool(worst <= 1e-8 * lam0)
    certificates["kkt_worst_violation"] = worst
    certificates["kkt_scale"] = lam0
    certificates["lambda_strictly_decreasing"] = monotone
    certificates["residual_nonincreasing"] = nonincreasing


def _solve_and_export(
    problem: DesignProblem,
    outdir: Path,
    certificates: dict,
    lambda_floor: float = 0.0,
    max_breakpoints: int = 1000,
    curve_samples: int = 9,
):
    path = solve_path(problem, lambda_floor=lambda_floor, max_breakpoints=max_breakpoints)
    buf = io.StringIO()
    path_to_csv(path, buf)
    _write(outdir, "path.csv", buf.getvalue())
    _write(outdir, "path.json", path_to_json(path))
    _check_kkt(path, certificates)

    solutions: dict = {"termination": path.termination}
    try:
        exact = exact_solution(path)
        solutions["exact"] = _solution_record(exact, {"exact_reached": True})
    except ExactSolutionUnavailableError as err:
        best = min(path.breakpoints, key=lambda bp: bp.residual)
        exact = Solution(
            coeffs=best.coeffs,
            lam=best.lam,
            residual=best.residual,
            l1_norm=best.l1_norm,
            sparsity=int(np.count_nonzero(np.abs(best.coeffs) > 1e-12)),
        )
        solutions["exact"] = _solution_record(
            exact, {"exact_reached": False, "note": str(err)}
        )
    try:
        unit = solution_at_l1(path, 1.0)
        solutions["unit_norm"] = _solution_record(unit)
    except L1NotAttainedError as err:
        unit = None
        solutions["unit_norm"] = {"error": str(err)}

    curve = tradeoff_curve(path, samples_per_segment=curve_samples)
    lines = ["residual,l1_norm"]
    lines += [f"{r!r},{l!r}" for r, l in curve]
    _write(outdir, "tradeoff.csv", "\n".join(lines) + "\n")
    return path, exact, unit, solutions


def _interpolation_sweep(problem, a, b, steps=11):
    rows = []
    for t in np.linspace(0.0, 1.0, steps):
        sol = interpolate_solutions(a, b, float(t), problem)
        rows.append((float(t), sol.residual, sol.l1_norm, sol.sparsity))
    return rows


def _estimator_validation(scheme, seed: int, shots: int, certificates: dict) -> dict:
    """Statement-level check: sampled mean within 4 SE of the exact value."""
    zero_state = np.diag([1.0, 0.0]).astype(complex)
    observable = PauliObservable(1, {"Z": 1.0})
    state0 = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    truth = float(observable.coeff_vector() @ (scheme.mean_ptm() @ state0))
    out = {"true_value": truth, "modes": {}}
    ok = True
    for mode in ("analytic_weight", "full_shot"):
        result = estimate_expectation([scheme], zero_state, observable, shots, mode=mode, seed=seed)
        dev = abs(result.mean - truth)
        margin = 4 * max(result.standard_error, 1e-15)
        passed = bool(dev <= margin or dev <= 1e-12)
        ok = bool(ok and passed and result.empirical_variance <= result.variance_bound + 1e-12)
        out["modes"][mode] = {
            "mean": result.mean,
            "se": result.standard_error,
            "bound": result.variance_bound,
            "empirical_variance": result.empirical_variance,
            "within_4se": passed,
        }
    out["shot_bound_at_0.01"] = shot_bound(0.01, [scheme.l1_norm], observable.infinity_norm)
    certificates["estimator_within_4se"] = ok
    return out


def _manifest(outdir: Path, command: str, config: dict, certificates: dict, outputs: list[str], libraries: dict):
    manifest = {
        "tool": "qpsynth",
        "version": __version__,
        "backend": ACTIVE_BACKEND,
        "command": command,
        "config": config,
        "library_hashes": libraries,
        "certificates": certificates,
        "outputs": sorted(outputs),
        "unix_time": time.time(),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def _all_passed(certificates: dict) -> bool:
    return all(v for k, v in certificates.items() if isinstance(v, bool))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_pai(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certificates: dict = {}
    config = vars(args).copy()
    config.pop("func", None)

    spacing = 2 * np.pi / 2**args.bits
    theta = (args.midway_k + 0.5) * spacing if args.theta is None else args.theta
    config["resolved_theta"] = theta

    library = pai_library(args.bits, args.axis)
    desired = rotation_gate(args.axis, theta)
    problem = build_single_target(library, desired)
    _write(outdir, "library.json", library.to_json())
    _write(outdir, "problem.json", problem.to_json())
    matrix_to_binary(problem.matrix, str(outdir / "problem.bin"))

    path, exact, unit, solutions = _solve_and_export(problem, outdir, certificates)
    certificates["exact_reached"] = solutions["exact"].get("exact_reached", False)
    certificates["sum_rule"] = bool(abs(exact.coeffs.sum() - 1.0) <= 1e-8)
    if unit is not None:
        solutions["interpolation"] = [
            {"t": t, "residual": r, "l1_norm": l, "sparsity": s}
            for t, r, l, s in _interpolation_sweep(problem, unit, exact)
        ]

    if args.baseline:
        nearest = int(np.argmin([
            hs_distance(e.ptm_at(0.0), desired) for e in library.entries
        ]))
        base_lib = clifford_recovery_library(desired, base=library.entries[nearest])
        base_problem = build_single_target(base_lib, desired)
        base_path = solve_path(base_problem)
        base_exact = exact_solution(base_path)
        solutions["clifford_baseline"] = _solution_record(base_exact)
        certificates["overhead_below_baseline"] = bool(
            exact.l1_norm - 1.0 < base_exact.l1_norm - 1.0
        )
        curve = tradeoff_curve(base_path, samples_per_segment=9)
        lines = ["residual,l1_norm"]
        lines += [f"{r!r},{l!r}" for r, l in curve]
        _write(outdir, "tradeoff_baseline.csv", "\n".join(lines) + "\n")

    scheme = scheme_from_coeffs(exact.coeffs, library)
    validation = _estimator_validation(scheme, args.seed, args.shots, certificates)
    _write(outdir, "estimator.json", json.dumps(validation, indent=2))
    _write(outdir, "solutions.json", json.dumps(solutions, indent=2))

    outputs = [p.name for p in outdir.iterdir()]
    _manifest(outdir, "pai", config, certificates, outputs, {"library.json": library.sha256()})
    ok = _all_passed(certificates)
    print(f"pai: exact sparsity {exact.sparsity}, overhead {exact.l1_norm - 1.0:.3e}, "
          f"certificates {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def run_clifford_t(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certificates: dict = {}
    config = vars(args).copy()
    config.pop("func", None)

    desired = rotation_gate("Z", args.theta)
    base_library = enumerate_clifford_t(
        args.theta, args.t_budget, args.epsilon, max_entries=args.max_entries
    )
    library = append_clifford_recovery(base_library)
    problem = build_single_target(library, desired)
    _write(outdir, "library.json", library.to_json())
    _write(outdir, "problem.json", problem.to_json())
    matrix_to_binary(problem.matrix, str(outdir / "problem.bin"))

    path, exact, unit, solutions = _solve_and_export(problem, outdir, certificates)
    certificates["exact_reached"] = solutions["exact"].get("exact_reached", False)
    certificates["sum_rule"] = bool(abs(exact.coeffs.sum() - 1.0) <= 1e-8)

    baseline_lib = clifford_recovery_library(desired, base=library.entries[0])
    baseline_problem = build_single_target(baseline_lib, desired)
    baseline_exact = exact_solution(solve_path(baseline_problem))
    solutions["clifford_baseline"] = _solution_record(baseline_exact)
    certificates["overhead_below_baseline"] = bool(
        exact.l1_norm - 1.0 < baseline_exact.l1_norm - 1.0
    )

    # per-entry overrotation angles: Bloch direction of entry applied to |0>
    rows = ["label,t_count,distance,bloch_theta,bloch_phi,coeff,nonzero"]
    for j, entry in enumerate(library.entries):
        block = entry.ptm_at(0.0).entries[1:, 1:]
        v = block @ np.array([0.0, 0.0, 1.0])
        btheta = float(np.arccos(np.clip(v[2], -1, 1)))
        bphi = float(np.arctan2(v[1], v[0]))
        coeff = float(exact.coeffs[j])
        rows.append(
            f"{entry.label},{entry.payload.get('t_count', 0)},"
            f"{entry.payload.get('distance', '')},{btheta!r},{bphi!r},"
            f"{coeff!r},{int(abs(coeff) > 1e-12)}"
        )
    _write(outdir, "entries.csv", "\n".join(rows) + "\n")
    certificates["sparse_support"] = bool(exact.sparsity <= problem.matrix.shape[0])

    _write(outdir, "solutions.json", json.dumps(solutions, indent=2))
    outputs = [p.name for p in outdir.iterdir()]
    _manifest(outdir, "clifford-t", config, certificates, outputs, {"library.json": library.sha256()})
    ok = _all_passed(certificates)
    print(
        f"clifford-t: {len(library)} columns, exact overhead {exact.l1_norm - 1.0:.3e} "
        f"vs baseline {baseline_exact.l1_norm - 1.0:.3e}, certificates {'pass' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def run_control(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certificates: dict = {}
    config = vars(args).copy()
    config.pop("func", None)

    offsets = np.linspace(args.drift_min, args.drift_max, args.grid_points)
    desired = rotation_gate(args.target_axis, args.target_angle)
    library = build_pulse_library(
        desired,
        n_pulses=args.pulses,
        offsets=offsets,
        n_steps=args.steps,
        dt=args.dt,
        cap=args.cap,
        seed=args.seed,
        max_iterations=args.iterations,
        threads=args.threads,
    )
    _write(outdir, "library.json", library.to_json())

    if args.band is not None:
        problem = build_band_selective(library, desired, args.band)
    else:
        problem = build_broadband(library, desired)
    _write(outdir, "problem.json", problem.to_json())
    matrix_to_binary(problem.matrix, str(outdir / "problem.bin"))

    path, exact, unit, solutions = _solve_and_export(
        problem, outdir, certificates, max_breakpoints=args.max_breakpoints
    )
    certificates["exact_residual_small"] = bool(exact.residual <= 1e-6)

    # per-offset error curves for every pulse and both solutions
    dim = 4**library.n_qubits
    block = dim * dim
    rows = ["label,offset,error"]
    base_entries = [e for e in library.entries if e.provenance == "pulse"]
    per_pulse_avg = {}
    for entry in base_entries:
        errs = []
        for d in offsets:
            err = hs_distance(entry.ptm_at(float(d)), desired)
            errs.append(err)
            rows.append(f"{entry.label},{d!r},{err!r}")
        per_pulse_avg[entry.label] = float(np.sqrt(np.mean(np.square(errs))))
    matrix = problem.matrix
    for name, sol in (("exact", exact), ("unit_norm", unit)):
        if sol is None:
            continue
        synth = matrix @ sol.coeffs
        for i, d in enumerate(offsets):
            seg = slice(i * block, (i + 1) * block)
            err = float(np.linalg.norm(synth[seg] - problem.target[seg]))
            rows.append(f"solution-{name},{d!r},{err!r}")
    _write(outdir, "errors.csv", "\n".join(rows) + "\n")

    if unit is not None and args.band is None:
        unit_rms = float(np.linalg.norm(matrix @ unit.coeffs - problem.target) / np.sqrt(len(offsets)))
        best_pulse_rms = min(per_pulse_avg.values())
        certificates["unit_norm_beats_every_pulse"] = bool(unit_rms < best_pulse_rms)
        solutions["grid_rms_errors"] = {
            "unit_norm": unit_rms,
            "pulses": per_pulse_avg,
        }

    # signal-level validation of the synthesized excitation
    if args.shots > 0 and args.band is None:
        scheme = scheme_from_coeffs(exact.coeffs, library)
        rho0 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)  # Pauli Z deviation
        times = args.dt * np.arange(args.time_points)
        estimate = nmr_estimate_signal(scheme, rho0, offsets, times, args.shots, seed=args.seed)
        ideal = nmr_ideal_signal(desired, rho0, offsets, times)
        buf = io.StringIO()
        estimate.to_csv(buf)
        _write(outdir, "signals.csv", buf.getvalue())
        dev_re = np.abs(estimate.signal.real - ideal.real)
        dev_im = np.abs(estimate.signal.imag - ideal.imag)
        ok_sig = bool(
            np.all(dev_re <= 4 * np.maximum(estimate.se_real, 1e-12))
            and np.all(dev_im <= 4 * np.maximum(estimate.se_imag, 1e-12))
        )
        certificates["signal_within_4se"] = ok_sig

    _write(outdir, "solutions.json", json.dumps(solutions, indent=2))
    outputs = [p.name for p in outdir.iterdir()]
    _manifest(outdir, "control", config, certificates, outputs, {"library.json": library.sha256()})
    ok = _all_passed(certificates)
    print(
        f"control: exact residual {exact.residual:.3e}, "
        f"certificates {'pass' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def run_solve(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certificates: dict = {}
    problem = DesignProblem.from_json(Path(args.problem).read_text())
    report = diagnostics(problem)
    path, exact, unit, solutions = _solve_and_export(
        problem, outdir, certificates,
        lambda_floor=args.lambda_floor, max_breakpoints=args.max_breakpoints,
    )
    solutions["diagnostics"] = {
        "numerical_rank": report.numerical_rank,
        "condition_number": report.condition_number,
        "min_column_distance": report.min_column_distance,
    }
    _write(outdir, "solutions.json", json.dumps(solutions, indent=2))
    config = {k: v for k, v in vars(args).items() if k != "func"}
    outputs = [p.name for p in outdir.iterdir()]
    _manifest(outdir, "solve", config, certificates, outputs, {})
    ok = _all_passed(certificates)
    print(f"solve: termination {path.termination}, exact residual {exact.residual:.3e}, "
          f"certificates {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def run_sample(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certificates: dict = {}
    library = GateLibrary.from_json(Path(args.library).read_text())
    payload = json.loads(Path(args.coeffs).read_text())
    if args.which in payload and isinstance(payload[args.which], dict):
        coeffs = np.array(payload[args.which]["coeffs"], dtype=float)
    elif "coeffs" in payload:
        coeffs = np.array(payload["coeffs"], dtype=float)
    else:
        raise QpsynthError(f"no coefficient vector under key {args.which!r}")
    scheme = scheme_from_coeffs(coeffs, library)
    validation = _estimator_validation(scheme, args.seed, args.shots, certificates)
    _write(outdir, "estimator.json", json.dumps(validation, indent=2))
    config = {k: v for k, v in vars(args).items() if k != "func"}
    outputs = [p.name for p in outdir.iterdir()]
    _manifest(outdir, "sample", config, certificates, outputs, {args.library: library.sha256()})
    ok = _all_passed(certificates)
    print(f"sample: mean {validation['modes']['analytic_weight']['mean']:.6f} "
          f"(truth {validation['true_value']:.6f}), certificates {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpsynth",
        description="Sparse probabilistic synthesis of quantum operations",
    )
    parser.add_argument("--version", action="version", version=f"qpsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pai", help="discrete-angle interpolation pipeline")
    p.add_argument("--bits", type=int, default=7)
    p.add_argument("--axis", choices=("X", "Y", "Z"), default="X")
    p.add_argument("--theta", type=float, default=None, help="target angle (radians)")
    p.add_argument("--midway-k", type=int, default=20,
                   help="when --theta is omitted, use the angle midway between notches k and k+1")
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_pai)

    p = sub.add_parser("clifford-t", help="bounded-T-count sequence pipeline")
    p.add_argument("--theta", type=float, default=0.234234)
    p.add_argument("--t-budget", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--max-entries", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_clifford_t)

    p = sub.add_parser("control", help="broadband / band-selective pulse pipeline")
    p.add_argument("--pulses", type=int, default=20)
    p.add_argument("--grid-points", type=int, default=7)
    p.add_argument("--drift-min", type=float, default=-2.0)
    p.add_argument("--drift-max", type=float, default=2.0)
    p.add_argument("--cap", type=float, default=6.0)
    p.add_argument("--steps", type=int, default=32)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--band", type=float, default=None,
                   help="halfwidth of a band-selective target; omit for broadband")
    p.add_argument("--target-axis", choices=("X", "Y", "Z"), default="X")
    p.add_argument("--target-angle", type=float, default=np.pi / 2)
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--time-points", type=int, default=32)
    p.add_argument("--max-breakpoints", type=int, default=2000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_control)

    p = sub.add_parser("solve", help="solve a design problem from a JSON export")
    p.add_argument("--problem", required=True)
    p.add_argument("--lambda-floor", type=float, default=0.0)
    p.add_argument("--max-breakpoints", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_solve)

    p = sub.add_parser("sample", help="validate a scheme from exported files")
    p.add_argument("--library", required=True)
    p.add_argument("--coeffs", required=True, help="solutions.json or a {coeffs: [...]} file")
    p.add_argument("--which", default="exact")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_sample)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QpsynthError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
