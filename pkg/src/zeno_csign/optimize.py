"""Interaction-time optimisation, gamma scaling sweeps and the inverse "required gamma" search."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import GateParams
from .errors import NotBracketedError
from .gates import SWAP, IdealGate, device_channel_single_rail, dual_rail_channel, ideal_S
from .metrics import choi_of_channel, process_fidelity, success_probability_closed
from .parity import encoded_gate_channel

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    tau_min: float = 1e-2
    tau_max: float = 10.0
    grid: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.tau_min < self.tau_max:
            raise ValueError("need 0 < tau_min < tau_max")
        if self.grid < 3:
            raise ValueError("the bracketing grid needs at least three points")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def taus(self) -> np.ndarray:
        return np.geomspace(self.tau_min, self.tau_max, self.grid)


@dataclass(frozen=True)
class Objective:
    """A fidelity functional of (gamma, tau) with kappa = pi/(2 tau).

    ``raw``: process fidelity of the bare device against S (single rail; with
    ``balanced`` the dual-rail device with lossy H arms against SWAP.S).
    ``encoded``: success-conditioned fidelity of the parity-encoded CSIGN.
    """

    kind: str = "raw"
    balanced: bool = False

    def __post_init__(self):
        if self.kind not in ("raw", "encoded"):
            raise ValueError(f"unknown objective {self.kind!r}")

    @property
    def name(self) -> str:
        return f"{self.kind}_{'balanced' if self.balanced else 'unbalanced'}"

    def fidelity(self, gamma: float, tau: float) -> float:
        if self.kind == "encoded":
            return _encoded(self.balanced, float(gamma), float(tau))[0]
        return _raw_fidelity(self.balanced, float(gamma), float(tau))

    def success(self, gamma: float, tau: float) -> float:
        if self.kind == "encoded":
            return _encoded(self.balanced, float(gamma), float(tau))[1]
        return success_probability_closed(dual_rail_channel(GateParams.csign(gamma, tau), self.balanced))

    def __call__(self, gamma: float, tau: float) -> float:
        return self.fidelity(gamma, tau)


RAW = Objective("raw")
ENCODED_UNBALANCED = Objective("encoded", False)
ENCODED_BALANCED = Objective("encoded", True)


@functools.lru_cache(maxsize=4096)
def _encoded(balanced: bool, gamma: float, tau: float) -> tuple[float, float]:
    res = encoded_gate_channel(GateParams.csign(gamma, tau), balanced)
    return res.process_fidelity, res.success_probability


@functools.lru_cache(maxsize=4096)
def _raw_fidelity(balanced: bool, gamma: float, tau: float) -> float:
    params = GateParams.csign(gamma, tau)
    if balanced:
        routed = dual_rail_channel(params, True)
        return process_fidelity(choi_of_channel(routed), IdealGate(SWAP @ ideal_S().matrix)).process_fidelity
    return process_fidelity(choi_of_channel(device_channel_single_rail(params)), ideal_S()).process_fidelity


@dataclass(frozen=True)
class OptimumRecord:
    gamma: float
    tau_opt: float
    fidelity_at_opt: float
    success_prob_at_opt: float
    bracket: tuple[float, float]
    iterations: int
    boundary: Optional[str] = None  # "lower"/"upper" when the grid maximum sits on the search edge
    objective: str = field(default="raw_unbalanced", compare=False)

    def as_row(self) -> dict:
        return {"gamma": self.gamma, "tau_opt": self.tau_opt, "fidelity_at_opt": self.fidelity_at_opt,
                "success_prob_at_opt": self.success_prob_at_opt}


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float, int]:
    """Maximise a unimodal f on [lo, hi] until the bracket is narrower than tol. Returns (x, f(x), iterations)."""
    a, b = lo, hi
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc, it) if fc >= fd else (d, fd, it)


def find_tau_opt(gamma: float, objective: Objective = RAW, search: Optional[SearchConfig] = None) -> OptimumRecord:
    """Grid bracketing on a log grid followed by golden-section refinement."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    search = search or SearchConfig()
    taus = search.taus()
    values = np.array([objective(gamma, t) for t in taus])
    k = int(np.argmax(values))
    f = functools.partial(objective, gamma)
    if k == 0 or k == len(taus) - 1:
        edge = "lower" if k == 0 else "upper"
        tau = float(taus[k])
        return OptimumRecord(float(gamma), tau, float(values[k]), objective.success(gamma, tau),
                             (tau, tau), 0, edge, objective.name)
    lo, hi = float(taus[k - 1]), float(taus[k + 1])
    tau, fid, it = golden_section_max(f, lo, hi, search.tol)
    if values[k] > fid:  # refinement never returns worse than the best grid point
        tau, fid = float(taus[k]), float(values[k])
    return OptimumRecord(float(gamma), float(tau), float(fid), objective.success(gamma, tau),
                         (lo, hi), it, None, objective.name)


def gamma_scaling_sweep(gammas: Sequence[float], objective: Objective = RAW,
                        search: Optional[SearchConfig] = None) -> list[OptimumRecord]:
    gammas = [float(g) for g in gammas]
    if any(g <= 0 for g in gammas):
        raise ValueError("gammas must be positive")
    if gammas != sorted(gammas):
        raise ValueError("gammas must be sorted")
    out = []
    for g in gammas:
        try:
            out.append(find_tau_opt(g, objective, search))
        except Exception as exc:
            raise type(exc)(f"gamma={g}: {exc}") from exc
    return out


def required_gamma(target_fidelity: float, objective: Objective = ENCODED_UNBALANCED,
                   bounds: tuple[float, float] = (100.0, 20000.0), search: Optional[SearchConfig] = None,
                   rel_tol: float = 1e-3) -> float:
    """Smallest gamma (to relative precision ``rel_tol``) whose optimised fidelity reaches the target."""
    lo, hi = map(float, bounds)
    if not 0 < lo < hi:
        raise ValueError("need 0 < gamma_lo < gamma_hi")

    def best(g):
        return find_tau_opt(g, objective, search).fidelity_at_opt

    f_lo, f_hi = best(lo), best(hi)
    if not f_lo < target_fidelity <= f_hi:
        raise NotBracketedError(f"target {target_fidelity} not bracketed by gamma in [{lo}, {hi}]", f_lo, f_hi)
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if best(mid) >= target_fidelity:
            hi = mid
        else:
            lo = mid
    return hi


def min_tau_for_target(gamma: float, target_fidelity: float, objective: Objective = ENCODED_BALANCED,
                       search: Optional[SearchConfig] = None) -> float:
    """Shortest interaction time on the search domain where the objective first reaches the target.

    Used when the fidelity keeps rising with tau (balanced gate) so that the
    optimum is the edge of the domain and the useful operating point is the
    cheapest tau that is good enough.
    """
    search = search or SearchConfig()
    taus = search.taus()
    for k, t in enumerate(taus):
        if objective(gamma, t) >= target_fidelity:
            break
    else:
        raise NotBracketedError(f"target {target_fidelity} never reached for tau <= {search.tau_max}",
                                objective(gamma, taus[0]), objective(gamma, taus[-1]))
    if k == 0:
        return float(taus[0])
    lo, hi = float(taus[k - 1]), float(t)
    while hi - lo > search.tol:
        mid = 0.5 * (lo + hi)
        if objective(gamma, mid) >= target_fidelity:
            hi = mid
        else:
            lo = mid
    return hi
