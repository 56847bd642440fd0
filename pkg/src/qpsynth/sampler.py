"""Monte Carlo realization of quasiprobability gate decompositions.

A coefficient vector g over a gate library defines a sampling scheme:
draw entry l with probability |g_l| / ||g||_1 and weight the run by
||g||_1 * sign(g_l).  The weighted average reproduces the synthesized
operation exactly, so expectation values and NMR-style signals estimated
this way are unbiased, at a variance cost bounded by ||g||_1^2 per
probabilistic slot.

Randomness comes from a counter-based Philox stream keyed by the seed;
uniform variates are laid out as one block of shape (shots, slots), which
makes runs reproducible bit for bit and shots independent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import get_kernels, kernels as _default_kernels
from .errors import DimensionMismatchError
from .libraries import GateLibrary
from .ptm import (
    PauliObservable,
    PauliTransferMatrix,
    state_to_coeffs,
    validate_density_matrix,
)

PROBABILITY_TOL = 1e-12


@dataclass
class QuasiprobabilityScheme:
    """Sampling distribution induced by a coefficient vector over a library."""

    coeffs: np.ndarray = field(repr=False)
    library: GateLibrary = field(repr=False)
    probabilities: np.ndarray = field(repr=False, init=False)
    signs: np.ndarray = field(repr=False, init=False)
    l1_norm: float = field(init=False)
    support: np.ndarray = field(repr=False, init=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size != len(self.library):
            raise DimensionMismatchError(
                f"coefficient vector of size {coeffs.size} for a library of "
                f"{len(self.library)} entries"
            )
        l1 = float(np.abs(coeffs).sum())
        if l1 <= 0.0:
            raise ValueError("coefficient vector is all zero")
        probs = np.zeros_like(coeffs)
        support = np.nonzero(coeffs)[0]
        probs[support] = np.abs(coeffs[support]) / l1
        self.coeffs = coeffs
        self.probabilities = probs
        self.signs = np.sign(coeffs)
        self.l1_norm = l1
        self.support = support
        self._support_cdf = np.cumsum(probs[support])
        self._support_cdf[-1] = 1.0

    def sample_indices(self, uniforms: np.ndarray) -> np.ndarray:
        """Map uniform variates to library indices; zero-probability entries
        are never produced."""
        pos = np.searchsorted(self._support_cdf, uniforms, side="right")
        return self.support[np.minimum(pos, self.support.size - 1)]

    def support_ptms(self, drift: float = 0.0) -> np.ndarray:
        """Stacked transfer matrices of the support entries at one drift."""
        return np.stack(
            [self.library.entries[j].ptm_at(drift).entries for j in self.support]
        )

    def mean_ptm(self, drift: float = 0.0) -> np.ndarray:
        """The synthesized operation sum_l g_l U_l (exact, no sampling)."""
        mats = self.support_ptms(drift)
        return np.einsum("l,lij->ij", self.coeffs[self.support], mats)


def scheme_from_coeffs(coeffs: np.ndarray, library: GateLibrary) -> QuasiprobabilityScheme:
    return QuasiprobabilityScheme(coeffs=np.asarray(coeffs, dtype=float), library=library)


def sample_gate(scheme: QuasiprobabilityScheme, rng: np.random.Generator):
    """Draw one library index and its estimator weight ||g||_1 * sign."""
    idx = int(scheme.sample_indices(np.array([rng.random()]))[0])
    return idx, scheme.l1_norm * scheme.signs[idx]


def shot_bound(epsilon: float, norms, observable_norm: float = 1.0) -> float:
    """Worst-case shot count for precision epsilon over a probabilistic circuit.

    Equals epsilon^-2 * ||O||_inf^2 * max_k(||g_k||_1)^(2 nu) with nu the
    number of probabilistic slots.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    norms = np.asarray(norms, dtype=float)
    nu = norms.size
    return float(epsilon**-2 * observable_norm**2 * np.max(norms) ** (2 * nu))


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    standard_error: float
    shots: int
    variance_bound: float
    rng_seed: int
    empirical_variance: float
    mode: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean,
                "se": self.standard_error,
                "shots": self.shots,
                "bound": self.variance_bound,
                "seed": self.rng_seed,
                "empirical_variance": self.empirical_variance,
                "mode": self.mode,
            }
        )


def _uniform_block(seed: int, shots: int, columns: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.random((shots, max(columns, 1)))


def estimate_expectation(
    circuit,
    rho0: np.ndarray,
    observable: PauliObservable,
    shots: int,
    mode: str = "analytic_weight",
    seed: int = 0,
    backend: str | None = None,
) -> EstimatorResult:
    """Unbiased estimate of Tr[O U_circuit(rho0)] over a probabilistic circuit.

    ``circuit`` is a sequence of slots, each a deterministic
    :class:`PauliTransferMatrix` or a :class:`QuasiprobabilityScheme`.  Per
    shot every scheme slot is sampled independently and the weights
    multiply.  In ``analytic_weight`` mode the shot value is the exact
    expectation under the sampled circuit times the weight; in
    ``full_shot`` mode a projective outcome in the observable's eigenbasis
    is additionally sampled and the shot value is the weighted eigenvalue.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if mode not in ("analytic_weight", "full_shot"):
        raise ValueError(f"unknown mode {mode!r}")
    kern = _default_kernels if backend is None else get_kernels(backend)

    n_qubits = observable.n_qubits
    dim = 4**n_qubits
    rho0 = validate_density_matrix(rho0, n_qubits)
    state0 = state_to_coeffs(rho0, n_qubits)

    scheme_slots = [s for s in circuit if isinstance(s, QuasiprobabilityScheme)]
    nu = len(scheme_slots)
    uniforms = _uniform_block(seed, shots, nu + 1)

    states = np.broadcast_to(state0, (shots, dim)).copy()
    weights = np.ones(shots)
    slot_counter = 0
    for slot in circuit:
        if isinstance(slot, QuasiprobabilityScheme):
            if slot.library.n_qubits != n_qubits:
                raise DimensionMismatchError("scheme library qubit count mismatch")
            idx_support = np.searchsorted(
                slot._support_cdf, uniforms[:, slot_counter], side="right"
            )
            idx_support = np.minimum(idx_support, slot.support.size - 1)
            weights *= slot.l1_norm * slot.signs[slot.support[idx_support]]
            ptms = slot.support_ptms()
            states = kern.evolve_sampled(
                np.ascontiguousarray(ptms),
                np.ascontiguousarray(idx_support, dtype=np.int64),
                np.ascontiguousarray(states),
            )
            slot_counter += 1
        elif isinstance(slot, PauliTransferMatrix):
            if slot.n_qubits != n_qubits:
                raise DimensionMismatchError("slot qubit count mismatch")
            states = states @ slot.entries.T
        else:
            raise TypeError(f"unsupported circuit slot {type(slot)!r}")

    if mode == "analytic_weight":
        values = weights * (states @ observable.coeff_vector())
    else:
        eigenvalues, projector_coeffs = observable.eigenbasis()
        probs = states @ projector_coeffs.T
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        cdf = np.cumsum(probs, axis=1)
        outcome = np.sum(cdf <= uniforms[:, nu, None], axis=1)
        outcome = np.minimum(outcome, eigenvalues.size - 1)
        values = weights * eigenvalues[outcome]

    mean = float(np.mean(values))
    sample_std = float(np.std(values, ddof=1)) if shots > 1 else 0.0
    norms = [s.l1_norm for s in scheme_slots] or [1.0]
    bound = float(np.max(norms) ** (2 * nu) * observable.infinity_norm**2)
    return EstimatorResult(
        mean=mean,
        standard_error=sample_std / np.sqrt(shots),
        shots=shots,
        variance_bound=bound,
        rng_seed=seed,
        empirical_variance=float(np.var(values)),
        mode=mode,
    )


@dataclass
class NmrSignalEstimate:
    """Per-offset complex signal estimates with standard errors."""

    offsets: np.ndarray
    times: np.ndarray
    signal: np.ndarray        # complex, shape (n_offsets, n_times)
    se_real: np.ndarray
    se_imag: np.ndarray
    shots: int
    rng_seed: int

    def to_csv(self, stream) -> None:
        writer = csv.writer(stream)
        writer.writerow(["offset", "t", "re_signal", "im_signal", "se_re", "se_im"])
        for i, d in enumerate(self.offsets):
            for j, t in enumerate(self.times):
                writer.writerow(
                    [
                        repr(float(d)),
                        repr(float(t)),
                        repr(self.signal[i, j].real),
                        repr(self.signal[i, j].imag),
                        repr(float(self.se_real[i, j])),
                        repr(float(self.se_imag[i, j])),
                    ]
                )


def _coherence_signal(states: np.ndarray, drift: float, times: np.ndarray) -> np.ndarray:
    """Signals sqrt(2) (c_X + i c_Y) e^{2 i d t} per shot and time.

    Free evolution under drift * Z for time t conjugates the state by
    exp(-i d Z t); the transverse coefficients then rotate so the complex
    coherence picks up the phase e^{2 i d t}.
    """
    coh0 = states[:, 1] + 1j * states[:, 2]
    phases = np.exp(2j * drift * times)
    return np.sqrt(2.0) * coh0[:, None] * phases[None, :]


def nmr_estimate_signal(
    scheme: QuasiprobabilityScheme,
    rho0: np.ndarray,
    offsets,
    times,
    shots: int,
    seed: int = 0,
) -> NmrSignalEstimate:
    """Estimate the free-induction signal of the synthesized excitation.

    Per shot and drift value, a pulse is drawn from the scheme and applied
    to ``rho0`` (a Hermitian deviation operator, conventionally the Pauli Z
    matrix; no unit-trace requirement).  The state then evolves freely under
    drift * Z and the transverse magnetization S(t) = Tr[rho(t) X] +
    i Tr[rho(t) Y] is recorded, weighted by ||g||_1 * sign.  The mean over
    shots is an unbiased estimate of the signal the desired operation would
    produce at every drift.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    offsets = np.asarray(offsets, dtype=float)
    times = np.asarray(times, dtype=float)
    if scheme.library.offset_grid is not None:
        grid = set(np.asarray(scheme.library.offset_grid).tolist())
        missing = [d for d in offsets.tolist() if d not in grid]
        if missing:
            raise ValueError(
                f"offsets {missing} not in the scheme library's grid"
            )
    n_qubits = scheme.library.n_qubits
    if n_qubits != 1:
        raise ValueError("signal estimation is defined for single-spin libraries")
    rho0 = np.asarray(rho0, dtype=complex)
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    state0 = state_to_coeffs(rho0, n_qubits)

    uniforms = _uniform_block(seed, shots, offsets.size)
    signal = np.empty((offsets.size, times.size), dtype=complex)
    se_re = np.empty((offsets.size, times.size))
    se_im = np.empty((offsets.size, times.size))
    for i, d in enumerate(offsets):
        idx_support = np.searchsorted(scheme._support_cdf, uniforms[:, i], side="right")
        idx_support = np.minimum(idx_support, scheme.support.size - 1)
        weights = scheme.l1_norm * scheme.signs[scheme.support[idx_support]]
        ptms = scheme.support_ptms(float(d))
        states = np.einsum("sij,j->si", ptms[idx_support], state0)
        samples = weights[:, None] * _coherence_signal(states, float(d), times)
        signal[i] = samples.mean(axis=0)
        denom = np.sqrt(shots)
        se_re[i] = samples.real.std(axis=0, ddof=1) / denom if shots > 1 else 0.0
        se_im[i] = samples.imag.std(axis=0, ddof=1) / denom if shots > 1 else 0.0
    return NmrSignalEstimate(
        offsets=offsets,
        times=times,
        signal=signal,
        se_real=se_re,
        se_imag=se_im,
        shots=shots,
        rng_seed=seed,
    )


def nmr_ideal_signal(
    operation: PauliTransferMatrix, rho0: np.ndarray, offsets, times
) -> np.ndarray:
    """Closed-form signal produced by applying ``operation`` exactly."""
    offsets = np.asarray(offsets, dtype=float)
    times = np.asarray(times, dtype=float)
    state = operation.entries @ state_to_coeffs(np.asarray(rho0, dtype=complex), operation.n_qubits)
    out = np.empty((offsets.size, times.size), dtype=complex)
    for i, d in enumerate(offsets):
        out[i] = _coherence_signal(state[None, :], float(d), times)[0]
    return out
