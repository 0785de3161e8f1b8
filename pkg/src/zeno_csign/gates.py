"""Target gates and the physical device channel on single- and dual-rail qubits.

Dual-rail modes are ordered (H_A, V_A, H_B, V_B). Only the V modes enter the
nonlinear device; the H modes are either untouched or, for the balanced
variant, see the same single-photon loss for the same duration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    GateParams,
    build_liouvillian,
    device_hamiltonian,
    device_propagator,
    lindblad_superoperator,
    unvec,
    vec,
)
from .fock import FockBasis, annihilation, build_basis, device_basis, embed_operator

LOGICAL_SINGLE_RAIL = ((0, 0), (0, 1), (1, 0), (1, 1))
LOGICAL_DUAL_RAIL = ((1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1))

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
PHASE = np.diag([1, 1j])
CSIGN = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class IdealGate:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("ideal gates act on two qubits")
        object.__setattr__(self, "matrix", m)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(4))) <= tol)


def ideal_S() -> IdealGate:
    """Swap-with-phases realised by the Zeno device: |01> -> -i|10>, |10> -> -i|01>, |11> frozen."""
    return IdealGate(np.array([[1, 0, 0, 0], [0, 0, -1j, 0], [0, -1j, 0, 0], [0, 0, 0, 1]]))


def lossless_beamsplitter_gate() -> IdealGate:
    """What a full-swap beamsplitter does without two-photon absorption: |11> picks up -1."""
    return IdealGate(np.array([[1, 0, 0, 0], [0, 0, -1j, 0], [0, -1j, 0, 0], [0, 0, 0, -1]]))


def compose_csign(gate: IdealGate) -> IdealGate:
    """SWAP . gate . (P kron P) with P = diag(1, i)."""
    return IdealGate(SWAP @ gate.matrix @ np.kron(PHASE, PHASE))


@dataclass(frozen=True)
class DeviceChannel:
    """A linear map on density matrices over ``basis``, stored as a column-stacked superoperator.

    ``logical`` lists the basis positions of the logical |00>, |01>, |10>, |11>.
    For an unrouted dual-rail channel the device leaves photons on the partner
    rail, so the logical subspace is only closed after :func:`route_outputs`.
    """

    superop: np.ndarray
    basis: FockBasis
    logical: tuple[int, ...]
    params: Optional[GateParams] = None
    encoding: str = "single_rail"
    balanced: bool = False
    routed: bool = True

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.superop @ vec(rho), self.dim)

    def choi_full(self) -> np.ndarray:
        """Unnormalised Choi matrix sum_ij |i><j| kron E(|i><j|) over the whole basis."""
        d = self.dim
        blocks = self.superop.reshape(d, d, d, d, order="F")  # [out_r, out_c, in_r, in_c]
        return blocks.transpose(2, 0, 3, 1).reshape(d * d, d * d)

    def then_unitary(self, u: np.ndarray) -> "DeviceChannel":
        """Follow the channel by conjugation with ``u``."""
        d = self.dim
        t = self.superop.reshape(d, d, d * d, order="F")
        t = np.einsum("ab,bcn,dc->adn", u, t, u.conj(), optimize=True)
        return replace(self, superop=t.reshape(d * d, d * d, order="F"))

    def after_unitary(self, u: np.ndarray) -> "DeviceChannel":
        """Precede the channel by conjugation with ``u``."""
        d = self.dim
        t = self.superop.reshape(d * d, d, d, order="F")
        t = np.einsum("nbc,ba,cd->nad", t, u, u.conj(), optimize=True)
        return replace(self, superop=t.reshape(d * d, d * d, order="F"))


def _positions(basis: FockBasis, states) -> tuple[int, ...]:
    return tuple(basis.position(s) for s in states)


def identity_channel(basis: FockBasis, logical_states=LOGICAL_SINGLE_RAIL, **kw) -> DeviceChannel:
    return DeviceChannel(np.eye(basis.dim ** 2, dtype=complex), basis, _positions(basis, logical_states), **kw)


def unitary_channel(u: np.ndarray, basis: FockBasis, logical_states=LOGICAL_SINGLE_RAIL, **kw) -> DeviceChannel:
    return DeviceChannel(np.kron(np.conj(u), u), basis, _positions(basis, logical_states), **kw)


def total_loss_channel(basis: FockBasis, logical_states=LOGICAL_SINGLE_RAIL, **kw) -> DeviceChannel:
    """Every input ends in the vacuum: E(X) = Tr(X) |vac><vac|."""
    d = basis.dim
    vac = basis.position((0,) * basis.mode_count)
    sup = np.zeros((d * d, d * d), dtype=complex)
    sup[vac + d * vac, [i + d * i for i in range(d)]] = 1.0
    return DeviceChannel(sup, basis, _positions(basis, logical_states), **kw)


def embed_logical_unitary(gate: IdealGate, basis: FockBasis, logical_states=LOGICAL_SINGLE_RAIL) -> np.ndarray:
    """Extend a 4x4 logical unitary to ``basis``, acting as identity off the logical subspace."""
    u = np.eye(basis.dim, dtype=complex)
    idx = _positions(basis, logical_states)
    u[np.ix_(idx, idx)] = gate.matrix
    return u


CSIGN_CONDITION_TOL = 1e-12


def device_channel_single_rail(params: GateParams, enforce_csign: bool = True) -> DeviceChannel:
    """Propagator of the master equation over {00, 01, 02, 10, 11, 20}; leakage states are kept."""
    if enforce_csign and abs(params.csign_condition) > CSIGN_CONDITION_TOL:
        raise ValueError(f"kappa*tau differs from pi/2 by {params.csign_condition:.3g}")
    basis = device_basis()
    prop = device_propagator(params, basis)
    return DeviceChannel(prop.matrix, basis, _positions(basis, LOGICAL_SINGLE_RAIL), params)


def dual_rail_basis() -> FockBasis:
    """(n_H, n_V) per rail with at most one H photon per rail and at most two V photons in total."""
    return build_basis(4, 4, [1, 2, 1, 2], predicate=lambda o: o[1] + o[3] <= 2)


def _amplitude_damping_superop(survival: float) -> np.ndarray:
    k0 = np.diag([1.0, math.sqrt(survival)])
    k1 = np.array([[0.0, math.sqrt(1.0 - survival)], [0.0, 0.0]])
    return sum(np.kron(k.conj(), k) for k in (k0, k1))


def _kron_superop(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """Superoperator of E_a (x) E_b, subsystem a being the more significant index."""
    da = math.isqrt(sa.shape[0])
    db = math.isqrt(sb.shape[0])
    ta = sa.reshape(da, da, da, da, order="F")  # [out_row, out_col, in_row, in_col]
    tb = sb.reshape(db, db, db, db, order="F")
    joint = np.einsum("acik,bdjl->abcdijkl", ta, tb)
    d = da * db
    return joint.reshape(d, d, d, d).reshape(d * d, d * d, order="F")


def _h_arm_superop(balanced: bool, params: Optional[GateParams]) -> np.ndarray:
    """Superoperator on the (H_A, H_B) occupations, index h_A*2 + h_B."""
    if not balanced:
        return np.eye(16, dtype=complex)
    _, rate, _, duration = params.generator_rates()
    single = _amplitude_damping_superop(math.exp(-rate * duration))
    return _kron_superop(single, single)


def lift_to_dual_rail(channel: DeviceChannel, balanced: bool) -> DeviceChannel:
    """Place the device on the V modes of two polarisation qubits.

    The result is not routed: a V photon that hopped across stays on the partner rail.
    """
    if channel.encoding != "single_rail" or channel.basis.states != device_basis().states:
        raise ValueError("lift needs a single-rail channel on the six-state device basis")
    basis = dual_rail_basis()
    d = basis.dim
    vb = channel.basis
    h_index = np.array([o[0] * 2 + o[2] for o in basis.states])
    v_index = np.array([vb.position((o[1], o[3])) for o in basis.states])
    # |s><s'| vectorises to s + d s'
    rows_s, rows_sp = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    rs, rsp = rows_s.ravel(order="F"), rows_sp.ravel(order="F")
    h_vec = h_index[rs] + 4 * h_index[rsp]
    v_vec = v_index[rs] + vb.dim * v_index[rsp]
    eh = _h_arm_superop(balanced, channel.params)
    sup = eh[np.ix_(h_vec, h_vec)] * channel.superop[np.ix_(v_vec, v_vec)]
    return DeviceChannel(sup, basis, _positions(basis, LOGICAL_DUAL_RAIL), channel.params,
                         "dual_rail", balanced, routed=False)


def v_mode_swap(basis: FockBasis) -> np.ndarray:
    """Permutation exchanging the V_A and V_B occupations."""
    u = np.zeros((basis.dim, basis.dim))
    for j, o in enumerate(basis.states):
        u[basis.position((o[0], o[3], o[2], o[1])), j] = 1.0
    return u


def v_mode_phases(basis: FockBasis) -> np.ndarray:
    """P = diag(1, i) on each qubit: a phase i per V photon."""
    return np.diag([1j ** (o[1] + o[3]) for o in basis.states])


def route_outputs(channel: DeviceChannel) -> DeviceChannel:
    """Swap the V output modes back onto their own rails, closing the dual-rail qubit subspace."""
    if channel.encoding != "dual_rail" or channel.routed:
        raise ValueError("route_outputs expects an unrouted dual-rail channel")
    return replace(channel.then_unitary(v_mode_swap(channel.basis)), routed=True)


def dual_rail_channel(params: GateParams, balanced: bool = False) -> DeviceChannel:
    """Routed dual-rail device; on the logical qubits its ideal action is SWAP . S = diag(1, -i, -i, 1)."""
    return route_outputs(lift_to_dual_rail(device_channel_single_rail(params), balanced))


def csign_dual_rail_channel(params: GateParams, balanced: bool = False) -> DeviceChannel:
    """Phases P on both V modes, the device, then the V-mode swap: ideally CSIGN on the dual-rail qubits."""
    ch = dual_rail_channel(params, balanced)
    return ch.after_unitary(v_mode_phases(ch.basis))


def ideal_csign_dual_rail_channel() -> DeviceChannel:
    """The lossless, perfectly Zeno-frozen stand-in for :func:`csign_dual_rail_channel`."""
    vb = device_basis()
    s_full = embed_logical_unitary(ideal_S(), vb)
    single = DeviceChannel(np.kron(s_full.conj(), s_full), vb, _positions(vb, LOGICAL_SINGLE_RAIL))
    ch = route_outputs(lift_to_dual_rail(single, balanced=False))
    return ch.after_unitary(v_mode_phases(ch.basis))


def dual_rail_liouvillian(params: GateParams, balanced: bool) -> np.ndarray:
    """Generator of the dual-rail device built directly on the dual-rail basis.

    Independent of :func:`lift_to_dual_rail`: the device operators are
    embedded mode by mode instead of tensoring superoperators.
    """
    basis = dual_rail_basis()
    vb = device_basis()
    coupling, r1, r2, _ = params.generator_rates()
    v_modes = [1, 3]
    h = embed_operator(_as_op(device_hamiltonian(vb, coupling), vb), vb, basis, v_modes).matrix
    jumps = []
    for mode in range(2):
        a = annihilation(vb, mode)
        jumps.append((r1, embed_operator(a, vb, basis, v_modes).matrix))
        jumps.append((r2, embed_operator(_as_op(a.matrix @ a.matrix, vb), vb, basis, v_modes).matrix))
    if balanced:
        for mode in (0, 2):
            jumps.append((r1, annihilation(basis, mode).matrix))
    return lindblad_superoperator(h, jumps)


def _as_op(matrix, basis):
    from .fock import ModeOperator

    return ModeOperator(np.asarray(matrix, dtype=complex), "composite", None, basis)
