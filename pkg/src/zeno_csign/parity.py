"""Parity-encoded CSIGN: attempt the gate on one photon of each logical qubit, then measure.

Each logical qubit is alpha|0>^(2)|0>_R + beta|1>^(2)|1>_R: an active n=2 parity
block (photons 1 and 2) entangled with an ideal remainder qubit R standing in
for the rest of the redundancy code. The register is ordered
(A1, A2, R_A, B1, B2, R_B) with photons 1 as six-level rails (n_H, n_V) and
photons 2 / remainders as qubits.

After the device acts on A1, B1 both are measured in the |+-> = (|H> +- |V>)/sqrt2
basis, with "loss" (empty rail) and "leak" (two or more photons on a rail)
as extra outcomes. If both register a +- result the second photons are measured
in the computational basis (success, CSIGN on the remainders); otherwise they
are measured in the +- basis, which strips the block and returns the remainders
to their input state. Pauli-Z corrections on the remainders depend on the
outcomes and are found by calibrating against an ideal device.
"""
from __future__ import annotations

import functools
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import GateParams
from .gates import (
    CSIGN,
    DeviceChannel,
    IdealGate,
    csign_dual_rail_channel,
    dual_rail_basis,
    ideal_csign_dual_rail_channel,
)
from .metrics import ChoiMatrix, choi_from_map, process_fidelity

RAIL_STATES = ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))
RAIL_DIM = len(RAIL_STATES)
REGISTER_DIMS = (RAIL_DIM, 2, 2, RAIL_DIM, 2, 2)
PHOTON = {0: (1, 0), 1: (0, 1)}  # logical bit -> (n_H, n_V)

RAIL_OUTCOMES = ("plus", "minus", "loss", "leak")
SUCCESS_OUTCOMES = ("plus", "minus")
COMPUTATIONAL = ("0", "1")
CORRECTIONS = ("II", "IZ", "ZI", "ZZ")

COMPLETENESS_TOL = 1e-8
CALIBRATION_TOL = 1e-10


# -- parity code states -----------------------------------------------------


@dataclass(frozen=True)
class ParityState:
    n: int
    logical: int
    amplitudes: np.ndarray  # over the 2**n computational strings, big-endian

    def support(self) -> list[str]:
        return [format(i, f"0{self.n}b") for i in np.flatnonzero(np.abs(self.amplitudes) > 1e-12)]


def build_parity_state(n: int, logical: int) -> ParityState:
    """(|+>^n + (-1)^logical |->^n) / sqrt2."""
    if not 1 <= n <= 4:
        raise ValueError("parity block size must be between 1 and 4")
    if logical not in (0, 1):
        raise ValueError("logical value must be 0 or 1")
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    p = functools.reduce(np.kron, [plus] * n)
    m = functools.reduce(np.kron, [minus] * n)
    amp = (p + (-1) ** logical * m) / math.sqrt(2)
    return ParityState(n, logical, amp / np.linalg.norm(amp))


@dataclass(frozen=True)
class BitflipReport:
    n: int
    max_state_error: float
    max_probability_error: float

    @property
    def passed(self) -> bool:
        return self.max_state_error <= 1e-12 and self.max_probability_error <= 1e-12


def heralded_bitflip_check(n: int, grid: int = 7) -> BitflipReport:
    """Measure the first photon of alpha|0>^(n) + beta|1>^(n) in the computational basis.

    Outcome 0 must leave alpha|0>^(n-1) + beta|1>^(n-1), outcome 1 the
    bit-flipped alpha|1>^(n-1) + beta|0>^(n-1), each with probability 1/2.
    """
    if n < 2:
        raise ValueError("need at least two photons to measure one out")
    zero, one = build_parity_state(n, 0).amplitudes, build_parity_state(n, 1).amplitudes
    zero_r, one_r = build_parity_state(n - 1, 0).amplitudes, build_parity_state(n - 1, 1).amplitudes
    state_err = prob_err = 0.0
    for theta, phi in itertools.product(np.linspace(0, math.pi, grid), np.linspace(0, 2 * math.pi, grid)):
        alpha, beta = math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)
        psi = (alpha * zero + beta * one).reshape(2, -1)
        for outcome, expected in ((0, alpha * zero_r + beta * one_r), (1, alpha * one_r + beta * zero_r)):
            branch = psi[outcome]
            p = float(np.vdot(branch, branch).real)
            prob_err = max(prob_err, abs(p - 0.5))
            overlap = abs(np.vdot(expected, branch / math.sqrt(p)))
            state_err = max(state_err, abs(1 - overlap))
    return BitflipReport(n, state_err, prob_err)


# -- register ----------------------------------------------------------------


def _logical_qubit(bit: int) -> np.ndarray:
    """alpha=delta_bit0 encoding on (photon 1 rail, photon 2, remainder): a 6 x 2 x 2 tensor."""
    block = build_parity_state(2, bit).amplitudes.reshape(2, 2)
    t = np.zeros((RAIL_DIM, 2, 2), dtype=complex)
    for x1, x2 in itertools.product((0, 1), repeat=2):
        t[RAIL_STATES.index(PHOTON[x1]), x2, bit] += block[x1, x2]
    return t


def encoded_basis_state(a: int, b: int) -> np.ndarray:
    """|a>_L |b>_L as a vector over (A1, A2, R_A, B1, B2, R_B), dimension 576."""
    return np.einsum("ijk,lmn->ijklmn", _logical_qubit(a), _logical_qubit(b)).reshape(-1)


@functools.lru_cache(maxsize=1)
def _rail_pair_embedding() -> np.ndarray:
    """Selection matrix from the 36 rail-pair product states onto the dual-rail device basis."""
    basis = dual_rail_basis()
    w = np.zeros((basis.dim, RAIL_DIM * RAIL_DIM))
    for ia, (ha, va) in enumerate(RAIL_STATES):
        for ib, (hb, vb) in enumerate(RAIL_STATES):
            occ = (ha, va, hb, vb)
            if occ in basis:
                w[basis.position(occ), ia * RAIL_DIM + ib] = 1.0
    return w


@functools.lru_cache(maxsize=1)
def _encoded_inputs() -> np.ndarray:
    """(logical j, dual-rail basis state, rest) amplitudes; rest = (A2, B2, R_A, R_B)."""
    w = _rail_pair_embedding()
    out = []
    for a, b in itertools.product((0, 1), repeat=2):
        t = encoded_basis_state(a, b).reshape(REGISTER_DIMS)
        t = t.transpose(0, 3, 1, 4, 2, 5).reshape(RAIL_DIM * RAIL_DIM, 16)
        chi = w @ t
        if abs(np.linalg.norm(chi) - 1) > 1e-14:
            raise AssertionError("encoded state has weight outside the dual-rail basis")
        out.append(chi)
    return np.array(out)


# -- measurements ------------------------------------------------------------


def rail_povm() -> dict[str, np.ndarray]:
    """Projectors on one (n_H, n_V) rail. They sum to the identity."""
    def ket(occ):
        v = np.zeros(RAIL_DIM)
        v[RAIL_STATES.index(occ)] = 1.0
        return v

    h, v = ket((1, 0)), ket((0, 1))
    plus, minus = (h + v) / math.sqrt(2), (h - v) / math.sqrt(2)
    leak = sum(np.outer(ket(o), ket(o)) for o in RAIL_STATES if sum(o) >= 2)
    return {
        "plus": np.outer(plus, plus),
        "minus": np.outer(minus, minus),
        "loss": np.outer(ket((0, 0)), ket((0, 0))),
        "leak": leak,
    }


QUBIT_PROJECTORS = {
    "0": np.diag([1.0, 0.0]),
    "1": np.diag([0.0, 1.0]),
    "plus": np.full((2, 2), 0.5),
    "minus": np.array([[0.5, -0.5], [-0.5, 0.5]]),
}

Z = np.diag([1.0, -1.0])
_PAULI = {"I": np.eye(2), "Z": Z}


def correction_unitary(label: str) -> np.ndarray:
    return np.kron(_PAULI[label[0]], _PAULI[label[1]])


def branch_keys() -> list[tuple[str, str, str, str]]:
    """All outcome tuples (A1, B1, A2, B2)."""
    keys = []
    for oa, ob in itertools.product(RAIL_OUTCOMES, repeat=2):
        success = oa in SUCCESS_OUTCOMES and ob in SUCCESS_OUTCOMES
        follow = COMPUTATIONAL if success else SUCCESS_OUTCOMES
        for xa, xb in itertools.product(follow, repeat=2):
            keys.append((oa, ob, xa, xb))
    return keys


def is_success(key) -> bool:
    return key[0] in SUCCESS_OUTCOMES and key[1] in SUCCESS_OUTCOMES


def _branch_operators(channel: DeviceChannel) -> dict[tuple, np.ndarray]:
    """For each outcome tuple, the unnormalised remainder output of every logical |j><k|.

    Returns arrays R[j, k] of shape (4, 4, 4, 4): the (R_A R_B) operator left
    behind when the register starts in |psi_j><psi_k|.
    """
    d = channel.dim
    w = _rail_pair_embedding()
    chi = _encoded_inputs()
    povm = rail_povm()
    rail_keys = list(itertools.product(RAIL_OUTCOMES, repeat=2))
    projs = np.array([w @ np.kron(povm[oa], povm[ob]) @ w.T for oa, ob in rail_keys])
    # Heisenberg-picture effects: m[b, r, q] = Tr(proj_b E(|r><q|)); vec(proj^T) picks the trace
    flat = projs.transpose(0, 2, 1).reshape(len(rail_keys), d * d, order="F")
    m = (flat.reshape(len(rail_keys), -1, order="C") @ channel.superop).reshape(len(rail_keys), d, d, order="F")
    out = {}
    for (oa, ob), mb in zip(rail_keys, m):
        x = np.tensordot(chi, mb, axes=(1, 0))  # j a q
        g = np.tensordot(x, chi.conj(), axes=(2, 1))  # j a k b
        g = g.transpose(0, 2, 1, 3).reshape(4, 4, 2, 2, 4, 2, 2, 4)  # j k | A2 B2 R | A2' B2' R'
        success = oa in SUCCESS_OUTCOMES and ob in SUCCESS_OUTCOMES
        follow = COMPUTATIONAL if success else SUCCESS_OUTCOMES
        for xa, xb in itertools.product(follow, repeat=2):
            pa, pb = QUBIT_PROJECTORS[xa], QUBIT_PROJECTORS[xb]
            out[(oa, ob, xa, xb)] = np.einsum("yx,sw,jkxwrysq->jkrq", pa, pb, g, optimize=True)
    return out


# -- corrections -------------------------------------------------------------


def _key_str(key) -> str:
    return ",".join(key)


@dataclass(frozen=True)
class CorrectionTable:
    entries: dict  # outcome tuple -> correction label

    def lookup(self, key) -> str:
        key = tuple(key)
        if key in self.entries:
            return self.entries[key]
        raise KeyError(f"no correction for branch {key}")

    def to_json(self) -> str:
        payload = {"version": 1, "entries": {_key_str(k): v for k, v in sorted(self.entries.items())}}
        return json.dumps(payload, indent=1, sort_keys=True)

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def load(cls, path) -> "CorrectionTable":
        data = json.loads(Path(path).read_text())
        return cls({tuple(k.split(",")): v for k, v in data["entries"].items()})


class CalibrationError(RuntimeError):
    pass


def mode_loss_superop(basis, modes) -> np.ndarray:
    """Empty the given modes completely, keeping which occupation was lost (one Kraus per value)."""
    d = basis.dim
    sup = np.eye(d * d, dtype=complex)
    for mode in modes:
        kraus = []
        for n in range(basis.per_mode_caps[mode] + 1):
            k = np.zeros((d, d))
            for j, occ in enumerate(basis.states):
                if occ[mode] == n:
                    k[basis.position(occ[:mode] + (0,) + occ[mode + 1:]), j] = 1.0
            kraus.append(k)
        sup = sum(np.kron(k.conj(), k) for k in kraus) @ sup
    return sup


def _conditional_choi(ops, keys, table_or_labels) -> tuple[ChoiMatrix, float]:
    total = np.zeros((4, 4, 4, 4), dtype=complex)
    for key in keys:
        label = table_or_labels[key] if isinstance(table_or_labels, dict) else table_or_labels
        c = correction_unitary(label)
        total += np.einsum("ab,jkbc,dc->jkad", c, ops[key], c.conj())
    choi = choi_from_map(lambda e: np.einsum("jk,jkab->ab", e, total))
    return choi, choi.trace


def _unique_correction(ops, key, target: IdealGate) -> Optional[str]:
    weight = float(sum(np.trace(ops[key][j, j]).real for j in range(4)) / 4)
    if weight <= CALIBRATION_TOL:
        return None
    good = []
    for label in CORRECTIONS:
        choi, tr = _conditional_choi(ops, [key], label)
        f = process_fidelity(choi.normalized(), target).process_fidelity
        if abs(1 - f) <= CALIBRATION_TOL:
            good.append(label)
    if len(good) != 1:
        raise CalibrationError(f"branch {key}: {len(good)} corrections reach fidelity 1")
    return good[0]


def calibrate_corrections() -> CorrectionTable:
    """Derive the Z corrections from an ideal, lossless device.

    Success branches must yield logical CSIGN; failure branches are exercised
    by emptying rail A, rail B or both after the ideal gate and must give back
    the identity. Leak outcomes cannot occur with an ideal device and reuse the
    correction of the matching loss outcome.
    """
    ideal = ideal_csign_dual_rail_channel()
    basis = ideal.basis
    entries = {}
    csign, identity = IdealGate(CSIGN), IdealGate(np.eye(4))

    ops = _branch_operators(ideal)
    for key in branch_keys():
        if is_success(key):
            label = _unique_correction(ops, key, csign)
            if label is None:
                raise CalibrationError(f"success branch {key} never occurs with the ideal device")
            entries[key] = label

    for lost in LOSS_SCENARIOS.values():
        injected = DeviceChannel(mode_loss_superop(basis, lost) @ ideal.superop, basis, ideal.logical,
                                 encoding="dual_rail")
        ops = _branch_operators(injected)
        for key in branch_keys():
            if is_success(key):
                continue
            label = _unique_correction(ops, key, identity)
            if label is not None:
                if key in entries and entries[key] != label:
                    raise CalibrationError(f"inconsistent corrections for {key}")
                entries[key] = label

    for key in branch_keys():
        if key in entries:
            continue
        proxy = tuple("loss" if o == "leak" else o for o in key)
        if proxy not in entries:
            raise CalibrationError(f"no calibrated branch to stand in for {key}")
        entries[key] = entries[proxy]
    return CorrectionTable(entries)


LOSS_SCENARIOS = {"A": (0, 1), "B": (2, 3), "AB": (0, 1, 2, 3)}


@dataclass(frozen=True)
class CertificateEntry:
    scenario: str  # "ideal" or the emptied rail(s)
    key: tuple
    weight: float
    correction: str
    fidelity: float  # against CSIGN on success branches, identity on failure branches


def calibration_certificate(table: Optional[CorrectionTable] = None) -> list[CertificateEntry]:
    """Re-run every occurring branch with its tabulated correction and record its fidelity."""
    table = table or default_corrections()
    ideal = ideal_csign_dual_rail_channel()
    scenarios = [("ideal", ideal)]
    for name, modes in LOSS_SCENARIOS.items():
        scenarios.append((name, DeviceChannel(mode_loss_superop(ideal.basis, modes) @ ideal.superop,
                                              ideal.basis, ideal.logical, encoding="dual_rail")))
    out = []
    for name, channel in scenarios:
        ops = _branch_operators(channel)
        for key in branch_keys():
            weight = float(sum(np.trace(ops[key][j, j]).real for j in range(4)) / 4)
            if weight <= CALIBRATION_TOL:
                continue
            target = IdealGate(CSIGN) if is_success(key) else IdealGate(np.eye(4))
            choi, _ = _conditional_choi(ops, [key], table.lookup(key))
            fid = process_fidelity(choi.normalized(), target).process_fidelity
            out.append(CertificateEntry(name, key, weight, table.lookup(key), fid))
    return out


@functools.lru_cache(maxsize=1)
def default_corrections() -> CorrectionTable:
    return calibrate_corrections()


# -- encoded gate ------------------------------------------------------------


@dataclass(frozen=True)
class EncodedResult:
    params: Optional[GateParams]
    balanced: bool
    choi: ChoiMatrix  # success-conditioned, normalised
    process_fidelity: float
    success_probability: float
    success_by_input: tuple[float, ...]  # logical |00>, |01>, |10>, |11>
    leak_weight: float
    branch_weights: dict = field(repr=False)
    completeness_error: float = 0.0


def run_protocol(channel: DeviceChannel, table: Optional[CorrectionTable] = None) -> EncodedResult:
    """Encoded CSIGN attempt with an arbitrary dual-rail device channel (already CSIGN-routed)."""
    table = table or default_corrections()
    ops = _branch_operators(channel)

    # probability of each branch for each logical basis input, and for the maximally mixed input
    per_input = {k: np.array([np.trace(r[j, j]).real for j in range(4)]) for k, r in ops.items()}
    weights = {k: float(v.mean()) for k, v in per_input.items()}
    total = sum(ops.values())
    gram = np.einsum("jkaa->jk", total)
    completeness = float(np.max(np.abs(gram - np.eye(4))))
    if completeness > COMPLETENESS_TOL:
        raise RuntimeError(f"branch weights are incomplete (error {completeness:.3g})")

    success_keys = [k for k in ops if is_success(k)]
    choi, trace = _conditional_choi(ops, success_keys, {k: table.lookup(k) for k in success_keys})
    norm = choi.normalized()
    fid = process_fidelity(norm, IdealGate(CSIGN), trace).process_fidelity
    by_input = tuple(float(sum(per_input[k][j] for k in success_keys)) for j in range(4))
    leak = float(sum(w for k, w in weights.items() if "leak" in k[:2]))
    return EncodedResult(channel.params, channel.balanced, norm, fid, float(trace), by_input, leak,
                         {_key_str(k): w for k, w in weights.items()}, completeness)


def encoded_gate_channel(params: GateParams, balanced: bool = False,
                         table: Optional[CorrectionTable] = None) -> EncodedResult:
    return run_protocol(csign_dual_rail_channel(params, balanced), table)


def ideal_encoded_gate(table: Optional[CorrectionTable] = None) -> EncodedResult:
    return run_protocol(ideal_csign_dual_rail_channel(), table)


def encoded_success_probability(params: GateParams, balanced: bool = False) -> float:
    return encoded_gate_channel(params, balanced).success_probability
