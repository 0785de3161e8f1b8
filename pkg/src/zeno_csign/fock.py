"""Photon-number bases and bosonic ladder operators on truncated Fock spaces."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class FockBasis:
    """Ordered set of multimode occupation vectors.

    States are sorted lexicographically on their occupation tuples, so
    indices are reproducible across runs and platforms.
    """

    mode_count: int
    max_total: int
    per_mode_caps: tuple[int, ...]
    states: tuple[Occupation, ...]
    index: dict = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, occ) -> bool:
        return tuple(occ) in self.index

    def position(self, occ: Sequence[int]) -> int:
        return self.index[tuple(occ)]

    def ket(self, occ: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.position(occ)] = 1.0
        return v

    def projector(self, occ: Sequence[int]) -> np.ndarray:
        v = self.ket(occ)
        return np.outer(v, v.conj())

    def total(self, i: int) -> int:
        return sum(self.states[i])


def build_basis(
    mode_count: int,
    max_total: int,
    per_mode_caps: Sequence[int],
    predicate: Optional[Callable[[Occupation], bool]] = None,
) -> FockBasis:
    """Enumerate every occupation vector obeying the total and per-mode caps.

    ``predicate`` adds an extra constraint (e.g. a cap on a subset of modes);
    states for which it returns False are dropped.
    """
    if mode_count < 1:
        raise ValueError("basis needs at least one mode")
    caps = tuple(int(c) for c in per_mode_caps)
    if len(caps) != mode_count:
        raise ValueError(f"expected {mode_count} caps, got {len(caps)}")
    if max_total < 0 or any(c < 0 for c in caps):
        raise ValueError("truncations must be non-negative")

    states = []
    for occ in itertools.product(*(range(c + 1) for c in caps)):
        if sum(occ) > max_total:
            continue
        if predicate is not None and not predicate(occ):
            continue
        states.append(tuple(occ))
    states.sort()
    return FockBasis(
        mode_count=mode_count,
        max_total=max_total,
        per_mode_caps=caps,
        states=tuple(states),
        index={s: i for i, s in enumerate(states)},
    )


def device_basis() -> FockBasis:
    """The two-mode, at-most-two-photon basis {00, 01, 02, 10, 11, 20}."""
    return build_basis(2, 2, [2, 2])


@dataclass(frozen=True)
class ModeOperator:
    matrix: np.ndarray
    kind: str  # "annihilation" | "creation" | "composite"
    mode: Optional[int]
    basis: FockBasis
    overflow: int = 0

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        return ModeOperator(self.matrix @ other.matrix, "composite", None, self.basis)

    @property
    def dag(self) -> "ModeOperator":
        kind = {"annihilation": "creation", "creation": "annihilation"}.get(self.kind, "composite")
        return ModeOperator(self.matrix.conj().T, kind, self.mode, self.basis, self.overflow)


def annihilation(basis: FockBasis, mode: int) -> ModeOperator:
    if not 0 <= mode < basis.mode_count:
        raise IndexError(f"mode {mode} out of range for {basis.mode_count}-mode basis")
    a = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, occ in enumerate(basis.states):
        n = occ[mode]
        if n == 0:
            continue
        lowered = occ[:mode] + (n - 1,) + occ[mode + 1:]
        i = basis.index.get(lowered)
        if i is not None:
            a[i, j] = np.sqrt(n)
    return ModeOperator(a, "annihilation", mode, basis)


def creation(basis: FockBasis, mode: int) -> ModeOperator:
    return annihilation(basis, mode).dag


def number(basis: FockBasis, mode: int) -> ModeOperator:
    a = annihilation(basis, mode)
    return ModeOperator(a.dag.matrix @ a.matrix, "composite", mode, basis)


def embed_operator(
    op: ModeOperator,
    source_basis: FockBasis,
    target_basis: FockBasis,
    mode_map: Sequence[int],
) -> ModeOperator:
    """Lift ``op`` onto ``target_basis``, with source mode k living on target mode ``mode_map[k]``.

    Unmapped target modes are spectators. Images that fall outside the target
    truncation are dropped and counted in ``overflow``.
    """
    mode_map = list(mode_map)
    if len(mode_map) != source_basis.mode_count:
        raise ValueError("mode_map length must equal the source mode count")
    if len(set(mode_map)) != len(mode_map):
        raise ValueError("mode_map must be injective")
    if any(not 0 <= m < target_basis.mode_count for m in mode_map):
        raise ValueError("mode_map points outside the target basis")

    src = np.asarray(op.matrix)
    out = np.zeros((target_basis.dim, target_basis.dim), dtype=complex)
    overflow = 0
    for j, occ in enumerate(target_basis.states):
        local = tuple(occ[m] for m in mode_map)
        sj = source_basis.index.get(local)
        column = src[:, sj] if sj is not None else None
        if column is None:
            overflow += 1
            continue
        for si in np.flatnonzero(column):
            image = list(occ)
            for k, m in enumerate(mode_map):
                image[m] = source_basis.states[si][k]
            ti = target_basis.index.get(tuple(image))
            if ti is None:
                overflow += 1
                continue
            out[ti, j] = column[si]
    return ModeOperator(out, op.kind, None if op.mode is None else mode_map[op.mode],
                        target_basis, overflow)
