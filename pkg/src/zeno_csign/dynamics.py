"""Master equation of the two-mode Zeno device and its propagators.

Density matrices are vectorised by stacking columns, so that
``vec(A X B) = (B^T kron A) vec(X)``.

Time is scaled by the single-photon loss rate: the generator is

    d rho/d tau = i[rho, H] + sum_j D[a_j] rho + gamma sum_j D[a_j^2] rho

with ``H = kappa (a1^dag a2 + a2^dag a1)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalFailure, PropagatorAccuracyError, StepLimitExceeded
from .fock import FockBasis, annihilation, device_basis

log = logging.getLogger(__name__)

EXPM_TOL = 1e-9


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True)
class UnscaledParams:
    epsilon: float
    gamma1: float
    gamma2: float
    t: float


@dataclass(frozen=True)
class GateParams:
    """Loss ratio ``gamma = gamma2/gamma1``, scaled time ``tau = gamma1 t``, coupling ``kappa = epsilon/gamma1``.

    If ``unscaled`` is set it is the source of truth and the scaled fields are
    derived (or None when gamma1 = 0, which has no scaled form).
    """

    gamma: Optional[float]
    tau: Optional[float]
    kappa: Optional[float]
    unscaled: Optional[UnscaledParams] = None

    def __post_init__(self):
        if self.unscaled is None:
            if self.gamma is None or self.tau is None or self.kappa is None:
                raise ValueError("scaled parameters require gamma, tau and kappa")
            if self.gamma < 0 or self.tau < 0:
                raise ValueError("gamma and tau must be non-negative")
        else:
            u = self.unscaled
            if min(u.gamma1, u.gamma2, u.t) < 0:
                raise ValueError("rates and time must be non-negative")

    @classmethod
    def csign(cls, gamma: float, tau: float) -> "GateParams":
        """Scaled parameters with kappa fixed by kappa*tau = pi/2."""
        if tau <= 0:
            raise ValueError("tau must be positive when kappa is derived from it")
        return cls(gamma=float(gamma), tau=float(tau), kappa=math.pi / (2 * tau))

    @classmethod
    def from_unscaled(cls, epsilon: float, gamma1: float, gamma2: float, t: float) -> "GateParams":
        u = UnscaledParams(float(epsilon), float(gamma1), float(gamma2), float(t))
        if gamma1 > 0:
            return cls(gamma=gamma2 / gamma1, tau=gamma1 * t, kappa=epsilon / gamma1, unscaled=u)
        return cls(gamma=None, tau=None, kappa=None, unscaled=u)

    def generator_rates(self) -> tuple[float, float, float, float]:
        """(coupling, one-photon rate, two-photon rate, duration) in the generator's own time unit."""
        if self.unscaled is not None:
            u = self.unscaled
            return u.epsilon, u.gamma1, u.gamma2, u.t
        return self.kappa, 1.0, self.gamma, self.tau

    @property
    def duration(self) -> float:
        return self.generator_rates()[3]

    @property
    def csign_condition(self) -> float:
        """Deviation of coupling*duration from pi/2."""
        c, _, _, t = self.generator_rates()
        return c * t - math.pi / 2


def lindblad_superoperator(
    hamiltonian: np.ndarray, jumps: Sequence[tuple[float, np.ndarray]]
) -> np.ndarray:
    """Column-stacked generator of ``-i[H, rho] + sum_k r_k D[L_k] rho``."""
    d = hamiltonian.shape[0]
    eye = np.eye(d)
    gen = -1j * (np.kron(eye, hamiltonian) - np.kron(hamiltonian.T, eye))
    for rate, op in jumps:
        if rate < 0:
            raise ValueError("dissipation rates must be non-negative")
        if rate == 0:
            continue
        n = op.conj().T @ op
        gen = gen + rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, n) - 0.5 * np.kron(n.T, eye))
    return gen


@dataclass(frozen=True)
class Liouvillian:
    matrix: np.ndarray
    params: GateParams
    basis: FockBasis

    @property
    def dim(self) -> int:
        return self.basis.dim


def device_hamiltonian(basis: FockBasis, coupling: float, modes=(0, 1)) -> np.ndarray:
    a1 = annihilation(basis, modes[0]).matrix
    a2 = annihilation(basis, modes[1]).matrix
    # normal ordered: lowering acts first so truncation never clips the intermediate state
    hop = a1.conj().T @ a2
    return coupling * (hop + hop.conj().T)


def _operator_form(params: GateParams, basis: FockBasis) -> np.ndarray:
    coupling, r1, r2, _ = params.generator_rates()
    if min(r1, r2) < 0:
        raise ValueError("negative loss rate")
    h = device_hamiltonian(basis, coupling)
    jumps = []
    for mode in range(basis.mode_count):
        a = annihilation(basis, mode).matrix
        jumps.append((r1, a))
        jumps.append((r2, a @ a))
    return lindblad_superoperator(h, jumps)


def _index_form(params: GateParams, basis: FockBasis) -> np.ndarray:
    """Transcription of the component equations for d_{mnpq} = <mn|rho|pq>."""
    if basis.mode_count != 2:
        raise ValueError("index-form transcription needs a two-mode basis")
    k, r1, g, _ = params.generator_rates()
    if min(r1, g) < 0:
        raise ValueError("negative loss rate")
    d = basis.dim
    gen = np.zeros((d * d, d * d), dtype=complex)
    sqrt = math.sqrt

    def put(row_mn, row_pq, coeff, src_mn, src_pq):
        i = basis.index.get(src_mn)
        j = basis.index.get(src_pq)
        if i is None or j is None or coeff == 0:
            return
        gen[row_mn + d * row_pq, i + d * j] += coeff

    for r, (m, n) in enumerate(basis.states):
        for c, (p, q) in enumerate(basis.states):
            put(r, c, -1j * k * sqrt(m * (n + 1)), (m - 1, n + 1), (p, q))
            put(r, c, -1j * k * sqrt((m + 1) * n), (m + 1, n - 1), (p, q))
            put(r, c, 1j * k * sqrt((p + 1) * q), (m, n), (p + 1, q - 1))
            put(r, c, 1j * k * sqrt(p * (q + 1)), (m, n), (p - 1, q + 1))
            put(r, c, r1 * sqrt((m + 1) * (p + 1)), (m + 1, n), (p + 1, q))
            put(r, c, r1 * sqrt((n + 1) * (q + 1)), (m, n + 1), (p, q + 1))
            put(r, c, g * sqrt((m + 1) * (m + 2) * (p + 1) * (p + 2)), (m + 2, n), (p + 2, q))
            put(r, c, g * sqrt((n + 1) * (n + 2) * (q + 1) * (q + 2)), (m, n + 2), (p, q + 2))
            diag = r1 * (m + n + p + q) + g * (m * (m - 1) + n * (n - 1) + p * (p - 1) + q * (q - 1))
            put(r, c, -0.5 * diag, (m, n), (p, q))
    return gen


def build_liouvillian(
    params: GateParams, basis: Optional[FockBasis] = None, form: str = "operator"
) -> Liouvillian:
    """Generator of the device master equation.

    ``form="operator"`` assembles it from H and the jump operators;
    ``form="index"`` transcribes the per-element ODEs directly. The two must agree.
    """
    basis = basis or device_basis()
    if form == "operator":
        mat = _operator_form(params, basis)
    elif form == "index":
        mat = _index_form(params, basis)
    else:
        raise ValueError(f"unknown form {form!r}")
    return Liouvillian(mat, params, basis)


@dataclass(frozen=True)
class Propagator:
    matrix: np.ndarray
    params: Optional[GateParams]
    method: str  # "exponential" | "integrated"
    basis: FockBasis
    error_estimate: float = 0.0
    steps: int = 0

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def then(self, other: "Propagator") -> "Propagator":
        """Run ``self`` first, then ``other``."""
        return Propagator(other.matrix @ self.matrix, None, self.method, self.basis,
                          self.error_estimate + other.error_estimate)


def _default_tau(liouvillian: Liouvillian, tau):
    if tau is None:
        tau = liouvillian.params.duration
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return float(tau)


def propagator_exponential(
    liouvillian: Liouvillian, tau: Optional[float] = None, method: str = "pade"
) -> Propagator:
    """exp(A tau).

    ``pade`` uses scaling and squaring; its error is estimated by comparing
    against the square of the half-time exponential. ``spectral`` diagonalises
    A and refuses when the eigenvector matrix is too ill-conditioned.
    """
    tau = _default_tau(liouvillian, tau)
    a = liouvillian.matrix * tau
    if method == "pade":
        p = scipy.linalg.expm(a)
        half = scipy.linalg.expm(a / 2)
        err = float(np.max(np.abs(p - half @ half)))
    elif method == "spectral":
        w, s = np.linalg.eig(a)
        cond = np.linalg.cond(s)
        err = float(cond * np.finfo(float).eps * max(1.0, np.max(np.abs(w))))
        if not np.isfinite(err) or err > EXPM_TOL:
            raise PropagatorAccuracyError(
                f"eigenvector condition number {cond:.3g} too large for diagonalisation"
            )
        p = (s * np.exp(w)) @ np.linalg.solve(s, np.eye(len(w)))
    else:
        raise ValueError(f"unknown method {method!r}")
    if err > EXPM_TOL:
        raise PropagatorAccuracyError(f"matrix exponential error estimate {err:.3g} exceeds {EXPM_TOL}")
    return Propagator(p, liouvillian.params, "exponential", liouvillian.basis, err)


@dataclass(frozen=True)
class StepControl:
    tol: float = 1e-10
    max_steps: int = 2**34
    sequential: bool = False


def rk4_increment(a: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of dy/dt = A y from every column of the identity, minus the identity."""
    y = np.eye(a.shape[0], dtype=complex)
    k1 = a @ y
    k2 = a @ (y + 0.5 * h * k1)
    k3 = a @ (y + 0.5 * h * k2)
    k4 = a @ (y + h * k3)
    return (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_flow(a: np.ndarray, tau: float, steps: int, sequential: bool) -> np.ndarray:
    inc = rk4_increment(a, tau / steps)
    eye = np.eye(a.shape[0], dtype=complex)
    if sequential:
        y = eye.copy()
        for _ in range(steps):
            y = y + inc @ y
        return y
    # Linear autonomous system: N identical steps compose to (I + E)^N.
    # Squaring the increment alone, (I+E)^2 = I + (2E + E^2), avoids the
    # cancellation that plain repeated squaring of a near-identity map suffers.
    if steps & (steps - 1):
        raise ValueError("composed RK4 flow needs a power-of-two step count")
    for _ in range(steps.bit_length() - 1):
        inc = 2 * inc + inc @ inc
    return eye + inc


def propagator_integrated(
    liouvillian: Liouvillian,
    tau: Optional[float] = None,
    step_control: StepControl = StepControl(),
) -> Propagator:
    """Fixed-step RK4 flow of the vectorised master equation with step-halving control.

    The step count doubles until two successive flows differ by at most
    ``step_control.tol`` entrywise; the finer one is returned.
    """
    tau = _default_tau(liouvillian, tau)
    if step_control.tol <= 0:
        raise ValueError("tolerance must be positive")
    a = liouvillian.matrix
    d2 = a.shape[0]
    if tau == 0:
        return Propagator(np.eye(d2, dtype=complex), liouvillian.params, "integrated",
                          liouvillian.basis, 0.0, 0)

    norm = np.linalg.norm(a, 1) * tau
    steps = 1 << max(0, math.ceil(math.log2(max(norm, 1.0) / 0.5)))
    coarse = _rk4_flow(a, tau, steps, step_control.sequential)
    while True:
        if 2 * steps > step_control.max_steps:
            raise StepLimitExceeded(
                f"RK4 needs more than {step_control.max_steps} steps for tau={tau}"
            )
        fine = _rk4_flow(a, tau, 2 * steps, step_control.sequential)
        err = float(np.max(np.abs(fine - coarse)))
        steps *= 2
        if err <= step_control.tol:
            return Propagator(fine, liouvillian.params, "integrated", liouvillian.basis, err, steps)
        coarse = fine


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    basis: FockBasis
    symmetrization: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def population(self, occ) -> float:
        i = self.basis.position(occ)
        return float(self.matrix[i, i].real)


HERMITIAN_TOL = 1e-12
SYMMETRIZE_TOL = 1e-10


def evolve(rho, prop: Propagator) -> DensityMatrix:
    """Push a density matrix through ``prop`` and re-symmetrise the result."""
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if mat.shape != (prop.dim, prop.dim):
        raise ValueError(f"density matrix shape {mat.shape} does not match basis dimension {prop.dim}")
    if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
        raise ValueError("input is not Hermitian")
    if abs(np.trace(mat) - 1) > HERMITIAN_TOL:
        raise ValueError("input is not trace-normalised")
    out = prop.apply(mat)
    sym = 0.5 * (out + out.conj().T)
    drift = float(np.max(np.abs(out - sym)))
    if drift > SYMMETRIZE_TOL:
        raise NumericalFailure(f"Hermiticity drift {drift:.3g} exceeds {SYMMETRIZE_TOL}")
    if drift:
        log.debug("re-symmetrised evolved state, correction %.3g", drift)
    return DensityMatrix(sym, prop.basis, drift)


def device_propagator(params: GateParams, basis: Optional[FockBasis] = None) -> Propagator:
    """Exponential propagator for the full duration, falling back to RK4 if the exponential fails."""
    liou = build_liouvillian(params, basis)
    try:
        return propagator_exponential(liou)
    except PropagatorAccuracyError:
        log.warning("matrix exponential rejected at %s; integrating instead", params)
        return propagator_integrated(liou)
