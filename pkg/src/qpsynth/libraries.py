"""Gate libraries: Clifford+T sequences, discrete-angle grids, shaped pulses.

Every library entry carries a payload from which its transfer matrix is
regenerated deterministically, so libraries serialize to JSON and round-trip
bit-exactly (pulse amplitudes are stored as hex floats).
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyLibraryError
from .ptm import (
    PauliTransferMatrix,
    hs_distance,
    identity_ptm,
    ptm_from_unitary,
    rotation_gate,
)
from .pulses import (
    DEFAULT_CAP,
    DEFAULT_DT,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_N_STEPS,
    PulseSequence,
    optimize_pulse,
    phase_shift_pulse,
    propagate_pulse,
)

PROVENANCES = (
    "clifford_t_sequence",
    "clifford",
    "pai_notch",
    "pulse",
    "pulse_phase_shifted",
)

_DEDUP_DECIMALS = 10  # PTM equality tolerance for enumeration


@lru_cache(maxsize=1)
def _generator_ptms() -> dict[str, np.ndarray]:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.diag([1.0, 1j])
    t = np.diag([1.0, np.exp(1j * np.pi / 4)])
    return {
        "H": ptm_from_unitary(h).entries,
        "S": ptm_from_unitary(s).entries,
        "T": ptm_from_unitary(t).entries,
    }


def word_to_ptm(word: str) -> PauliTransferMatrix:
    """Transfer matrix of a gate word; leftmost letter is applied first.

    The letter ``I`` denotes the identity and is only valid standalone.
    """
    if word == "I" or word == "":
        return identity_ptm(1)
    gens = _generator_ptms()
    m = np.eye(4)
    for ch in word:
        if ch not in gens:
            raise ValueError(f"unknown gate letter {ch!r} in word {word!r}")
        m = gens[ch] @ m
    return PauliTransferMatrix(1, m)


def _canonical_key(entries: np.ndarray) -> bytes:
    return (np.round(entries, _DEDUP_DECIMALS) + 0.0).tobytes()


@lru_cache(maxsize=1)
def _clifford_table() -> tuple[tuple[str, ...], tuple[bytes, ...]]:
    """Words and canonical keys of the 24 single-qubit Clifford channels."""
    gens = _generator_ptms()
    start = np.eye(4)
    found = {_canonical_key(start): ("I", start)}
    queue = deque([("I", start)])
    while queue:
        word, m = queue.popleft()
        for g in ("H", "S"):
            m2 = gens[g] @ m
            key = _canonical_key(m2)
            if key not in found:
                w2 = g if word == "I" else word + g
                found[key] = (w2, m2)
                queue.append((w2, m2))
    items = sorted(
        found.values(), key=lambda wm: (0 if wm[0] == "I" else len(wm[0]), wm[0])
    )
    words = tuple(w for w, _ in items)
    keys = tuple(_canonical_key(m) for _, m in items)
    return words, keys


def clifford_words_1q() -> list[str]:
    """Shortest-word labels of the 24 Clifford channels, identity first."""
    return list(_clifford_table()[0])


def clifford_group_1q() -> list[PauliTransferMatrix]:
    """The 24 single-qubit Clifford transfer matrices (signed permutations)."""
    return [word_to_ptm(w) for w in clifford_words_1q()]


def clifford_recovery_words() -> list[str]:
    """The 16-element Clifford subset used for recovery baselines.

    Keeps the identity, the Pauli rotations and the axis-swap rotations,
    dropping the eight order-3 corner rotations (those have a traceless
    Bloch block).
    """
    words = []
    for w in clifford_words_1q():
        block = word_to_ptm(w).entries[1:, 1:]
        if abs(np.trace(block)) > 0.5:
            words.append(w)
    return words


@dataclass
class LibraryEntry:
    """One implementable operation, regenerable from its payload."""

    label: str
    provenance: str
    payload: dict
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def pulse(self) -> PulseSequence:
        if self.provenance not in ("pulse", "pulse_phase_shifted"):
            raise ValueError(f"entry {self.label!r} has no pulse payload")
        amps = np.array(
            [float.fromhex(re) + 1j * float.fromhex(im) for re, im in self.payload["amplitudes"]]
        )
        seq = PulseSequence(amps, self.payload["dt"], self.payload["cap"])
        frame = self.payload.get("frame_phase", 0.0)
        if frame:
            seq = phase_shift_pulse(seq, frame)
        return seq

    def ptm_at(self, drift: float = 0.0) -> PauliTransferMatrix:
        key = float(drift)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.provenance in ("clifford_t_sequence", "clifford"):
            m = word_to_ptm(self.payload["word"])
            base_word = self.payload.get("applied_after_word")
            if base_word is not None:
                m = PauliTransferMatrix(1, m.entries @ word_to_ptm(base_word).entries)
            base_entry = self.payload.get("applied_after_entry")
            if base_entry is not None:
                base = LibraryEntry(
                    base_entry["label"], base_entry["provenance"], base_entry["payload"]
                )
                m = PauliTransferMatrix(1, m.entries @ base.ptm_at(key).entries)
        elif self.provenance == "pai_notch":
            bits = self.payload["bits"]
            notch = self.payload["notch"]
            angle = notch * 2.0 * np.pi / 2**bits
            m = rotation_gate(self.payload["axis"], angle)
        elif self.provenance in ("pulse", "pulse_phase_shifted"):
            m = propagate_pulse(self.pulse(), key)
            z_after = self.payload.get("z_after", 0.0)
            if z_after:
                m = PauliTransferMatrix(1, rotation_gate("Z", z_after).entries @ m.entries)
        else:  # pragma: no cover
            raise ValueError(self.provenance)
        self._cache[key] = m
        return m


@dataclass
class GateLibrary:
    """Labeled collection of implementable operations for one target."""

    entries: list[LibraryEntry]
    n_qubits: int = 1
    target: dict | None = None
    offset_grid: np.ndarray | None = None

    def __post_init__(self):
        if not self.entries:
            raise ValueError("library must be nonempty")
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("library labels must be unique")
        if self.offset_grid is not None:
            grid = np.asarray(self.offset_grid, dtype=float)
            if grid.size == 0:
                raise ValueError("offset grid must be nonempty when present")
            self.offset_grid = grid

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def ptms_at(self, drift: float = 0.0) -> list[PauliTransferMatrix]:
        return [e.ptm_at(drift) for e in self.entries]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "target": self.target,
                "offset_grid": None if self.offset_grid is None else self.offset_grid.tolist(),
                "entries": [
                    {"label": e.label, "provenance": e.provenance, "payload": e.payload}
                    for e in self.entries
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "GateLibrary":
        data = json.loads(text)
        grid = data.get("offset_grid")
        return cls(
            entries=[
                LibraryEntry(e["label"], e["provenance"], e["payload"])
                for e in data["entries"]
            ],
            n_qubits=int(data.get("n_qubits", 1)),
            target=data.get("target"),
            offset_grid=None if grid is None else np.array(grid, dtype=float),
        )

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _amplitudes_payload(seq: PulseSequence) -> dict:
    return {
        "amplitudes": [[a.real.hex(), a.imag.hex()] for a in seq.amplitudes],
        "dt": seq.dt,
        "cap": seq.cap,
    }


def enumerate_clifford_t(
    target_angle: float,
    max_t_count: int,
    epsilon: float,
    max_entries: int = 20,
) -> GateLibrary:
    """Enumerate distinct Clifford+T channels near a Z rotation.

    Breadth-first search over words in {H, S, T} with T-count as cost,
    deduplicating on the transfer matrix (tolerance 1e-10), keeps channels
    within ``epsilon`` Hilbert-Schmidt distance of Rz(target_angle), sorted
    by ascending distance, at most ``max_entries`` of them.
    """
    if max_t_count < 0:
        raise ValueError("max_t_count must be nonnegative")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    gens = _generator_ptms()
    start = np.eye(4)
    best: dict[bytes, tuple[int, str, np.ndarray]] = {
        _canonical_key(start): (0, "I", start)
    }
    queue = deque([(0, "I", start)])
    while queue:
        t_count, word, m = queue.popleft()
        cur = best[_canonical_key(m)]
        if (t_count, len(word)) > (cur[0], len(cur[1])):
            continue
        for g in ("H", "S", "T"):
            cost = t_count + (1 if g == "T" else 0)
            if cost > max_t_count:
                continue
            m2 = gens[g] @ m
            w2 = g if word == "I" else word + g
            key = _canonical_key(m2)
            known = best.get(key)
            if known is None or (cost, len(w2)) < (known[0], len(known[1])):
                best[key] = (cost, w2, m2)
                if g == "T":
                    queue.append((cost, w2, m2))
                else:
                    queue.appendleft((cost, w2, m2))

    target = rotation_gate("Z", target_angle)
    scored = sorted(
        (hs_distance(PauliTransferMatrix(1, m), target), t_count, word)
        for t_count, word, m in best.values()
    )
    within = [(d, t, w) for d, t, w in scored if d <= epsilon]
    if not within:
        raise EmptyLibraryError(epsilon, max_t_count, scored[0][0] if scored else None)
    entries = [
        LibraryEntry(
            label=word,
            provenance="clifford" if t_count == 0 else "clifford_t_sequence",
            payload={"word": word, "t_count": t_count, "distance": dist},
        )
        for dist, t_count, word in within[:max_entries]
    ]
    return GateLibrary(
        entries,
        target={"kind": "rotation", "axis": "Z", "angle": float(target_angle)},
    )


def append_clifford_recovery(library: GateLibrary, base_label: str | None = None) -> GateLibrary:
    """Extend a word library with recovery Cliffords composed onto one entry.

    The 15 non-identity recovery Cliffords are applied after the base entry
    (by default the first, i.e. closest, entry), mirroring the recovery
    construction that corrects a residual coherent error with cheap gates.
    """
    if base_label is None:
        base = library.entries[0]
    else:
        base = next(e for e in library.entries if e.label == base_label)
    base_word = base.payload["word"]
    extra = []
    for w in clifford_recovery_words():
        if w == "I":
            continue
        extra.append(
            LibraryEntry(
                label=f"{base.label}+{w}",
                provenance="clifford",
                payload={"word": w, "applied_after_word": base_word},
            )
        )
    return GateLibrary(
        library.entries + extra,
        n_qubits=library.n_qubits,
        target=library.target,
        offset_grid=library.offset_grid,
    )


def clifford_recovery_library(target_ptm: PauliTransferMatrix, base: LibraryEntry | None = None) -> GateLibrary:
    """The 16-column Clifford-recovery design used as an overhead baseline.

    Columns are the 16 recovery Cliffords, composed after ``base`` when one
    is given (recovery of a residual error) or used bare otherwise.
    """
    entries = []
    for w in clifford_recovery_words():
        payload: dict = {"word": w}
        if base is not None:
            if base.provenance in ("clifford", "clifford_t_sequence") and "applied_after" not in base.payload:
                payload["applied_after_word"] = base.payload["word"]
            else:
                payload["applied_after_entry"] = {
                    "label": base.label,
                    "provenance": base.provenance,
                    "payload": base.payload,
                }
        label = w if base is None else f"{base.label}+{w}"
        entries.append(LibraryEntry(label, "clifford", payload))
    target = {"kind": "ptm", "entries": target_ptm.entries.flatten().tolist()}
    return GateLibrary(entries, target=target)


def pai_library(bits: int, axis: str) -> GateLibrary:
    """All 2^bits discrete rotations with notch angles l * 2 pi / 2^bits."""
    if not 1 <= bits <= 16:
        raise ValueError("bits must lie in [1, 16]")
    width = len(str(2**bits - 1))
    entries = [
        LibraryEntry(
            label=f"notch-{l:0{width}d}",
            provenance="pai_notch",
            payload={"axis": axis, "bits": bits, "notch": l},
        )
        for l in range(2**bits)
    ]
    return GateLibrary(entries, target={"kind": "rotation_family", "axis": axis, "bits": bits})


_FRAME_PHASES = (np.pi / 2, np.pi, 3 * np.pi / 2)
_ZPOST_PHASES = (np.pi / 2, np.pi)


def pulse_library_entries(seq: PulseSequence, label: str, stats: dict | None = None) -> list[LibraryEntry]:
    """Base pulse plus its five Clifford variants.

    Three frame-shifted copies (amplitudes rotated by phi, the conjugated
    gate Rz(phi) U Rz(-phi)) and two virtual-Z copies (Rz(phi) composed
    after the gate, realized in hardware by phase-shifting all subsequent
    pulses).  Together the variants span the coefficient directions a
    broadband synthesis needs; either family alone is rank-deficient.  The
    virtual-Z set stops at phi = pi because I - Rz(pi/2) + Rz(pi) -
    Rz(3pi/2) annihilates any gate, so a fourth copy would introduce an
    exact linear dependence and break the solver's general position.
    """
    base_payload = _amplitudes_payload(seq)
    if stats:
        base_payload = {**base_payload, **stats}
    entries = [LibraryEntry(label, "pulse", base_payload)]
    for phi in _FRAME_PHASES:
        deg = int(round(np.degrees(phi)))
        entries.append(
            LibraryEntry(
                label=f"{label}/frame-{deg}",
                provenance="pulse_phase_shifted",
                payload={**_amplitudes_payload(seq), "frame_phase": phi},
            )
        )
    for phi in _ZPOST_PHASES:
        deg = int(round(np.degrees(phi)))
        entries.append(
            LibraryEntry(
                label=f"{label}/zpost-{deg}",
                provenance="pulse_phase_shifted",
                payload={**_amplitudes_payload(seq), "z_after": phi},
            )
        )
    return entries


def build_pulse_library(
    target: PauliTransferMatrix,
    n_pulses: int,
    offsets,
    n_steps: int = DEFAULT_N_STEPS,
    dt: float = DEFAULT_DT,
    cap: float = DEFAULT_CAP,
    seed: int = 0,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    threads: int = 1,
    include_variants: bool = True,
) -> GateLibrary:
    """Optimize a family of pulses and assemble the offset-resolved library.

    Each pulse starts from an independent seeded initialization (spawned
    from ``seed``), so different entries converge to different local optima.
    Results are merged in pulse order regardless of thread scheduling.
    """
    offsets = np.asarray(offsets, dtype=float)
    child_seeds = [
        int(s.generate_state(1, np.uint64)[0])
        for s in np.random.SeedSequence(seed).spawn(n_pulses)
    ]

    def run(i):
        return optimize_pulse(
            target,
            offsets,
            n_steps=n_steps,
            dt=dt,
            cap=cap,
            seed=child_seeds[i],
            max_iterations=max_iterations,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_pulses)))
    else:
        results = [run(i) for i in range(n_pulses)]

    entries: list[LibraryEntry] = []
    for i, result in enumerate(results):
        label = f"pulse-{i:02d}"
        stats = {
            "seed": result.seed,
            "mean_infidelity": result.mean_infidelity,
            "converged": result.converged,
        }
        if include_variants:
            entries.extend(pulse_library_entries(result.pulse, label, stats))
        else:
            payload = {**_amplitudes_payload(result.pulse), **stats}
            entries.append(LibraryEntry(label, "pulse", payload))

    return GateLibrary(
        entries,
        target={"kind": "ptm", "entries": target.entries.flatten().tolist()},
        offset_grid=offsets,
    )


def library_ptm_target(library: GateLibrary) -> PauliTransferMatrix:
    """Reconstruct the stored target transfer matrix of a library."""
    if not library.target or library.target.get("kind") != "ptm":
        raise ValueError("library does not carry an explicit target matrix")
    dim = 4**library.n_qubits
    entries = np.array(library.target["entries"], dtype=float).reshape(dim, dim)
    return PauliTransferMatrix(library.n_qubits, entries)
