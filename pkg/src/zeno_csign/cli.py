"""Command-line driver: fidelity sweeps, tau optimisation, encoded gate runs and resource reports."""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import GateParams
from .errors import NotBracketedError, NumericalFailure
from .gates import device_channel_single_rail, dual_rail_channel, ideal_S, identity_channel
from .metrics import (
    average_gate_fidelity,
    channel_fidelity,
    success_probability_closed,
    success_probability_montecarlo,
)
from .fock import device_basis
from .optimize import Objective, SearchConfig, find_tau_opt, gamma_scaling_sweep
from .parity import CalibrationError, default_corrections, encoded_gate_channel, ideal_encoded_gate
from .resources import (
    REFERENCE_RATIOS,
    ResourceReport,
    FidelityTargetError,
    crossover_gamma,
    loqc_resources,
    zeno_at_gamma,
)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
DIGITS = 12


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class TauRange:
    lo: float
    hi: float
    steps: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.lo])
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.steps)
        return np.linspace(self.lo, self.hi, self.steps)


def parse_tau(text: str) -> TauRange:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"--tau expects min:max:steps[:linear|log], got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad --tau {text!r}: {exc}") from None
    spacing = parts[3] if len(parts) == 4 else "linear"
    if spacing not in ("linear", "log"):
        raise UsageError(f"tau spacing must be linear or log, got {spacing!r}")
    if steps < 1:
        raise UsageError("tau steps must be at least 1")
    if not (lo > 0 and math.isfinite(hi)):
        raise UsageError("tau values must be positive and finite")
    if steps == 1 and lo != hi:
        raise UsageError("a single tau step needs min == max")
    if steps > 1 and not lo < hi:
        raise UsageError("tau range is degenerate: need min < max")
    return TauRange(lo, hi, steps, spacing)


def parse_floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} expects a comma separated list of numbers, got {text!r}") from None
    if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise UsageError(f"{name} values must be positive and finite")
    return vals


def fmt(x):
    """Values at 12 significant digits; the CSV and JSON writers share this rounding."""
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, str):
        return x
    return float(f"{float(x):.{DIGITS}g}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{DIGITS}g}"
    return str(v)


def render(columns: Sequence[str], rows: Sequence[dict], meta: dict, fmt_name: str) -> str:
    table = [{c: fmt(r.get(c)) for c in columns} for r in rows]
    if fmt_name == "json":
        return json.dumps({"meta": meta, "columns": list(columns), "rows": table}, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# zeno_csign {meta['version']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    buf.write(f"# corrections_sha256: {meta['corrections_sha256']}\n")
    for note in meta.get("notes", []):
        buf.write(f"# note: {note}\n")
    buf.write(",".join(columns) + "\n")
    for r in table:
        buf.write(",".join(_csv_cell(r[c]) for c in columns) + "\n")
    return buf.getvalue()


# -- commands -----------------------------------------------------------------


def _objective(args) -> Objective:
    return Objective(args.objective, args.balanced)


def _search(args) -> SearchConfig:
    if args.tau is None:
        return SearchConfig()
    tr = parse_tau(args.tau)
    if tr.spacing != "log" or tr.steps < 3:
        raise UsageError("the tau search domain needs log spacing and at least 3 grid points")
    return SearchConfig(tau_min=tr.lo, tau_max=tr.hi, grid=tr.steps)


def _success(params: GateParams, args) -> float:
    channel = dual_rail_channel(params, args.balanced)
    if args.mc_samples is None:
        return success_probability_closed(channel)
    return success_probability_montecarlo(channel, args.mc_samples, args.seed)[0]


def cmd_fidelity_sweep(args):
    if args.tau is None:
        raise UsageError("fidelity-sweep needs --tau")
    gammas, taus = parse_floats(args.gamma, "--gamma"), parse_tau(args.tau).values()
    obj = _objective(args)
    rows = []
    for g in gammas:
        for t in taus:
            params = GateParams.csign(g, float(t))
            fp = obj.fidelity(g, float(t))
            ps = obj.success(g, float(t)) if args.objective == "encoded" else _success(params, args)
            rows.append({"gamma": g, "tau": float(t), "kappa": params.kappa, "process_fidelity": fp,
                         "avg_gate_fidelity": average_gate_fidelity(fp), "success_prob": ps})
    return ("gamma", "tau", "kappa", "process_fidelity", "avg_gate_fidelity", "success_prob"), rows, []


OPT_COLUMNS = ("gamma", "tau_opt", "fidelity_at_opt", "success_prob_at_opt")


def _opt_notes(records):
    return [f"gamma={r.gamma:.{DIGITS}g}: maximum on the {r.boundary} edge of the tau domain"
            for r in records if r.boundary]


def cmd_tau_opt(args):
    search, obj = _search(args), _objective(args)
    records = [find_tau_opt(g, obj, search) for g in parse_floats(args.gamma, "--gamma")]
    return OPT_COLUMNS, [r.as_row() for r in records], _opt_notes(records)


def cmd_gamma_scaling(args):
    search, obj = _search(args), _objective(args)
    gammas = parse_floats(args.gamma, "--gamma")
    if gammas != sorted(gammas):
        raise UsageError("gamma-scaling needs --gamma in increasing order")
    records = gamma_scaling_sweep(gammas, obj, search)
    return OPT_COLUMNS, [r.as_row() for r in records], _opt_notes(records)


ENCODED_COLUMNS = ("gamma", "tau", "balanced", "conditional_fidelity", "success_prob", "leak_weight")


def _encoded_row(gamma, tau, balanced, res):
    return {"gamma": gamma, "tau": tau, "balanced": balanced, "conditional_fidelity": res.process_fidelity,
            "success_prob": res.success_probability, "leak_weight": res.leak_weight}


def cmd_encoded(args):
    if args.ideal:
        res = ideal_encoded_gate()
        return ENCODED_COLUMNS, [_encoded_row(None, None, False, res)], ["ideal lossless device"]
    gammas = parse_floats(args.gamma, "--gamma")
    rows, notes = [], []
    if args.tau is not None:
        for g in gammas:
            for t in parse_tau(args.tau).values():
                rows.append(_encoded_row(g, float(t), args.balanced,
                                         encoded_gate_channel(GateParams.csign(g, float(t)), args.balanced)))
        return ENCODED_COLUMNS, rows, notes
    obj = Objective("encoded", args.balanced)
    for g in gammas:
        rec = find_tau_opt(g, obj)
        res = encoded_gate_channel(GateParams.csign(g, rec.tau_opt), args.balanced)
        rows.append(_encoded_row(g, rec.tau_opt, args.balanced, res))
        notes += _opt_notes([rec])
    return ENCODED_COLUMNS, rows, notes


RESOURCE_COLUMNS = ("protocol", "target_fidelity", "P_f_max", "code_size_n", "gamma", "tau", "fidelity",
                    "meets_target", "success_prob", "photons_per_success", "ratio_vs_loqc", "reference_ratio")


def cmd_resources(args):
    pfs = parse_floats(args.pf_max, "--pf-max")
    if any(p >= 1 for p in pfs):
        raise UsageError("--pf-max values must lie in (0, 1)")
    target = args.target
    rows, notes = [], []
    for pf in pfs:
        rows.append(loqc_resources(pf).as_row())
    ideal = ideal_encoded_gate()
    rows.append(ResourceReport("zeno_ideal", target, None, None, None, ideal.success_probability,
                               4.0 / ideal.success_probability, None, None, ideal.process_fidelity).as_row()
                | {"meets_target": ideal.process_fidelity >= target})
    points = [(g, False) for g in parse_floats(args.gamma, "--gamma")]
    points += [(g, True) for g in parse_floats(args.balanced_gamma, "--balanced-gamma")]
    for g, balanced in points:
        for pf in pfs:
            try:
                rep = zeno_at_gamma(g, balanced, target, pf, check=False)
            except NotBracketedError as exc:
                notes.append(f"{'balanced' if balanced else 'unbalanced'} gamma={g:.{DIGITS}g}: {exc}")
                break
            row = rep.as_row() | {"target_fidelity": target, "meets_target": rep.fidelity >= target}
            row["reference_ratio"] = REFERENCE_RATIOS.get(("balanced" if balanced else "unbalanced", pf))
            rows.append(row)
    if args.crossover:
        for balanced in (False, True):
            for pf in pfs:
                label = "crossover_balanced" if balanced else "crossover_unbalanced"
                try:
                    g = crossover_gamma(pf, target, balanced)
                except NotBracketedError as exc:
                    notes.append(f"{label} P_f_max={pf:.{DIGITS}g}: {exc}")
                    continue
                rows.append({"protocol": label, "target_fidelity": target, "P_f_max": pf, "gamma": g})
    notes.append("Zeno photons = 4/P_s (four photons per attempt); LOQC photons = 8 + n/2")
    return RESOURCE_COLUMNS, rows, notes


SELF_TEST_COLUMNS = ("check", "value", "expected", "tolerance", "passed")


def cmd_self_test(args):
    vb = device_basis()
    checks = []
    checks.append(("ideal_encoded_fidelity", ideal_encoded_gate().process_fidelity, 1.0, 1e-10))
    checks.append(("identity_vs_S", channel_fidelity(identity_channel(vb), ideal_S()).process_fidelity, 0.25, 1e-12))
    lossless = GateParams.from_unscaled(math.pi / 2, 0.0, 0.0, 1.0)
    checks.append(("lossless_corner",
                   channel_fidelity(device_channel_single_rail(lossless), ideal_S()).process_fidelity, 0.25, 1e-9))
    params = GateParams.csign(100.0, 1.0)
    single = device_channel_single_rail(params)
    rho = np.zeros((vb.dim, vb.dim), dtype=complex)
    rho[vb.position((0, 1)), vb.position((0, 1))] = 1.0
    out = single.apply(rho)
    checks.append(("single_photon_transfer", out[vb.position((1, 0)), vb.position((1, 0))].real, math.exp(-1.0), 1e-9))
    rows = [{"check": n, "value": v, "expected": e, "tolerance": tol, "passed": abs(v - e) <= tol}
            for n, v, e, tol in checks]
    args._failed = not all(r["passed"] for r in rows)
    return SELF_TEST_COLUMNS, rows, []


COMMANDS = {
    "fidelity-sweep": cmd_fidelity_sweep,
    "tau-opt": cmd_tau_opt,
    "gamma-scaling": cmd_gamma_scaling,
    "encoded": cmd_encoded,
    "resources": cmd_resources,
    "self-test": cmd_self_test,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, gamma_default: str) -> None:
    p.add_argument("--gamma", default=gamma_default, help="comma separated loss ratios gamma2/gamma1")
    p.add_argument("--tau", default=None, help="min:max:steps[:linear|log]")
    p.add_argument("--balanced", action="store_true", help="add matching loss to the H arms")
    p.add_argument("--objective", choices=("raw", "encoded"), default="raw")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=None,
                   help="estimate success probabilities by Haar sampling instead of the closed form")
    p.add_argument("--output", default=None, help="write here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zeno-csign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _add_common(p, "4000" if name == "resources" else "100")
        if name == "encoded":
            p.add_argument("--ideal", action="store_true", help="use the lossless, perfectly frozen device")
        if name == "resources":
            p.add_argument("--pf-max", default="0.01,0.0001", help="catastrophic failure budgets")
            p.add_argument("--target", type=float, default=0.999, help="conditional fidelity target")
            p.add_argument("--balanced-gamma", default="500")
            p.add_argument("--no-crossover", dest="crossover", action="store_false")
    return parser


def resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if not k.startswith("_") and k != "output"}
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.mc_samples is not None and args.mc_samples < 1:
        parser.error("--mc-samples must be at least 1")
    try:
        columns, rows, notes = COMMANDS[args.command](args)
        meta = {"version": __version__, "config": resolved_config(args),
                "corrections_sha256": default_corrections().checksum, "notes": notes}
        text = render(columns, rows, meta, args.format)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zeno-csign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, NotBracketedError, FidelityTargetError, CalibrationError, FloatingPointError) as exc:
        print(f"zeno-csign: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_NUMERICAL if getattr(args, "_failed", False) else 0


if __name__ == "__main__":
    sys.exit(main())
