"""Choi states, process fidelity and average success probability of two-qubit channels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .gates import DeviceChannel, IdealGate

D_LOGICAL = 4
PSD_TOL = 1e-10


@dataclass(frozen=True)
class ChoiMatrix:
    """Jamiolkowski state (1/d) sum_jk |j><k| (x) E(|j><k|) restricted to the logical output block.

    ``trace`` is the weight left in the logical block; ``leak`` is the weight
    that went elsewhere (vacuum for dual rail, |02>/|20> leakage), so that
    trace + leak = 1 for a trace-preserving channel.
    """

    matrix: np.ndarray
    trace: float
    leak: float = 0.0
    qubit_basis_note: str = ""

    def normalized(self) -> "ChoiMatrix":
        return ChoiMatrix(self.matrix / self.trace, 1.0, 0.0, self.qubit_basis_note)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())


@dataclass(frozen=True)
class FidelityReport:
    process_fidelity: float
    average_gate_fidelity: float
    d: int = D_LOGICAL
    success_probability: Optional[float] = None


def choi_from_map(apply: Callable[[np.ndarray], np.ndarray], d: int = D_LOGICAL, note: str = "") -> ChoiMatrix:
    """Choi state of a map given as a function on d x d logical operators."""
    rho = np.zeros((d * d, d * d), dtype=complex)
    for j in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = 1.0
            rho[j * d:(j + 1) * d, k * d:(k + 1) * d] = apply(e)
    rho /= d
    return ChoiMatrix(rho, float(np.trace(rho).real), 0.0, note)


def unitary_choi(gate: IdealGate) -> ChoiMatrix:
    u = gate.matrix
    return choi_from_map(lambda e: u @ e @ u.conj().T, note="ideal unitary")


def logical_map(channel: DeviceChannel, logical: Optional[Sequence[int]] = None):
    """The channel compressed to the logical subspace: X (4x4) -> P E(V X V^dag) P."""
    idx = list(channel.logical if logical is None else logical)
    if len(idx) != D_LOGICAL:
        raise ValueError("logical subspace selector must pick exactly four states")
    d = channel.dim

    def apply(x: np.ndarray) -> np.ndarray:
        full = np.zeros((d, d), dtype=complex)
        full[np.ix_(idx, idx)] = x
        return channel.apply(full)[np.ix_(idx, idx)]

    return apply


def choi_of_channel(
    channel: DeviceChannel, logical: Optional[Sequence[int]] = None, normalize: bool = False
) -> ChoiMatrix:
    idx = list(channel.logical if logical is None else logical)
    choi = choi_from_map(logical_map(channel, idx), note=f"{channel.encoding} states {idx}")
    choi = ChoiMatrix(choi.matrix, choi.trace, 1.0 - choi.trace, choi.qubit_basis_note)
    return choi.normalized() if normalize else choi


def average_gate_fidelity(process_fidelity: float, d: int = D_LOGICAL) -> float:
    return (d * process_fidelity + 1.0) / (d + 1.0)


def process_fidelity(choi: ChoiMatrix, target: IdealGate, success_probability: Optional[float] = None) -> FidelityReport:
    """<phi_U| rho_E |phi_U> with |phi_U> = (I (x) U)|phi>; exact because the target is pure."""
    if not target.is_unitary():
        raise ValueError("target gate must be unitary")
    if choi.min_eigenvalue() < -PSD_TOL:
        raise ValueError(f"Choi matrix is not positive (min eigenvalue {choi.min_eigenvalue():.3g})")
    d = D_LOGICAL
    # component (j, m) of sum_j |j> U|j> / sqrt(d) is U[m, j] / sqrt(d)
    psi = target.matrix.T.reshape(-1) / np.sqrt(d)
    fp = float(np.real(psi.conj() @ choi.matrix @ psi))
    return FidelityReport(fp, average_gate_fidelity(fp, d), d, success_probability)


def channel_fidelity(channel: DeviceChannel, target: IdealGate, logical=None) -> FidelityReport:
    return process_fidelity(choi_of_channel(channel, logical), target)


def success_probability_closed(channel: DeviceChannel, logical: Optional[Sequence[int]] = None) -> float:
    """Tr{P E(P/4)} with P the projector on the no-loss logical subspace."""
    out = logical_map(channel, logical)(np.eye(D_LOGICAL) / D_LOGICAL)
    return float(np.trace(out).real)


def haar_states(rng: np.random.Generator, samples: int, d: int = D_LOGICAL) -> np.ndarray:
    """Rows are Haar-random pure states: normalised complex Gaussian vectors."""
    z = rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def success_probability_montecarlo(
    channel: DeviceChannel, samples: int, seed: int, logical: Optional[Sequence[int]] = None
) -> tuple[float, float]:
    """Haar average of the probability of staying in the logical subspace, with its standard error."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    psis = haar_states(rng, samples)
    fmap = logical_map(channel, logical)
    # the map is linear, so push a basis through once and contract with each sample
    images = np.empty((D_LOGICAL, D_LOGICAL), dtype=complex)
    for j in range(D_LOGICAL):
        for k in range(D_LOGICAL):
            e = np.zeros((D_LOGICAL, D_LOGICAL), dtype=complex)
            e[j, k] = 1.0
            images[j, k] = np.trace(fmap(e))
    probs = np.einsum("sj,jk,sk->s", psis, images, psis.conj()).real
    return _mean_and_error(probs)


def average_gate_fidelity_montecarlo(
    apply: Callable[[np.ndarray], np.ndarray], target: IdealGate, samples: int, seed: int
) -> tuple[float, float]:
    """Direct Haar estimate of the mean of <psi|U^dag E(|psi><psi|) U|psi>."""
    rng = np.random.default_rng(seed)
    psis = haar_states(rng, samples)
    u = target.matrix
    vals = np.empty(samples)
    for s, psi in enumerate(psis):
        out = apply(np.outer(psi, psi.conj()))
        phi = u @ psi
        vals[s] = np.real(phi.conj() @ out @ phi)
    return _mean_and_error(vals)


def _mean_and_error(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    err = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, err
