"""Command-line front end: evaluate mappings, run searches, emit traces.

Subcommands
    eval         score one mapping file on one layer, JSON to stdout
    optimize-sw  mapping search plus random baseline on a fixed config
    codesign     joint hardware/mapping search (--baseline adds random)

Exit codes: 0 success, 1 usage or parse error, 2 infeasible.

All output files are deterministic for a fixed config: JSON is dumped with
sorted keys, CSV columns are fixed, and nothing embeds timestamps or paths.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .acquisition import AcquisitionSpec, ProposerConfig
from .cost_model import EdpResult, evaluate_edp
from .design_space import (DEFAULT_BUDGET, DEFAULT_HARDWARE, DIMS, LEVELS,
                           ConstraintReport, EnergyTable, HardwareBudget,
                           HardwareConfig, Mapping, validate_mapping)
from . import optimizer
from .workloads import Workload, builtin_names, get_builtin, load_workload


# --- serialization ---------------------------------------------------------

def hardware_to_dict(hw: HardwareConfig) -> dict:
    return {"pe_x": hw.pe_x, "pe_y": hw.pe_y,
            "rf_words": hw.rf_words, "gb_words": hw.gb_words}


def hardware_from_dict(data: dict, energy: EnergyTable = EnergyTable()) -> HardwareConfig:
    if not isinstance(data, dict):
        raise ValueError("hardware must be a JSON object")
    missing = [k for k in ("pe_x", "pe_y", "rf_words", "gb_words") if k not in data]
    if missing:
        raise ValueError(f"hardware is missing fields: {', '.join(missing)}")
    return HardwareConfig(pe_x=int(data["pe_x"]), pe_y=int(data["pe_y"]),
                          rf_words=int(data["rf_words"]), gb_words=int(data["gb_words"]),
                          energy=energy)


def mapping_to_dict(m: Mapping) -> dict:
    return {
        "temporal": {d: {lv: m.temporal[d][lv] for lv in LEVELS} for d in DIMS},
        "spatial": {d: m.spatial[d] for d in DIMS},
        "perms": {lv: list(m.perms[lv]) for lv in LEVELS},
    }


def mapping_from_dict(data: dict) -> Mapping:
    if not isinstance(data, dict):
        raise ValueError("mapping must be a JSON object")
    for key in ("temporal", "spatial", "perms"):
        if key not in data:
            raise ValueError(f"mapping is missing the '{key}' field")
    temporal = {}
    for d, levels in data["temporal"].items():
        if not isinstance(levels, dict):
            raise ValueError(f"temporal[{d}] must map level names to factors")
        temporal[d] = {lv: int(f) for lv, f in levels.items()}
    spatial = {d: int(f) for d, f in data["spatial"].items()}
    perms = {lv: tuple(order) for lv, order in data["perms"].items()}
    return Mapping(temporal=temporal, spatial=spatial, perms=perms)


def report_to_dict(report: ConstraintReport) -> dict:
    return {"feasible": report.feasible,
            "violations": [{"kind": v.kind, "where": v.where,
                            "measured": v.measured, "limit": v.limit}
                           for v in report.violations]}


def _edp_result_to_dict(res: EdpResult) -> dict:
    return {"edp": res.edp, "energy": res.energy, "cycles": res.cycles,
            "macs": res.macs,
            "accesses": {lv: dict(res.accesses[lv]) for lv in LEVELS}}


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc


# --- trace output ----------------------------------------------------------

CSV_HEADER = "trial,feasible,edp,best_edp,normalized_curve"


def _fmt(v) -> str:
    if v is None or v != v or v == float("inf"):
        return ""
    return repr(float(v))


def trace_to_csv(trace: optimizer.OptimizationTrace) -> str:
    """Fixed-schema trace CSV.  Rows before the first feasible trial leave
    edp/best_edp empty and put 0.0 in the normalized column."""
    best = trace.best()
    running = trace.best_so_far()
    lines = [CSV_HEADER]
    for obs, cur in zip(trace.observations, running):
        norm = best.edp / cur if best is not None else 0.0
        lines.append(",".join([str(obs.trial), "true" if obs.feasible else "false",
                               _fmt(obs.edp), _fmt(cur), repr(float(norm))]))
    return "\n".join(lines) + "\n"


def _safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


# --- config ----------------------------------------------------------------

def _parse_energy(text: str) -> EnergyTable:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("--energy expects four comma-separated values: "
                         "e_rf,e_gb,e_dram,e_mac")
    vals = [float(p) for p in parts]
    return EnergyTable(e_rf=vals[0], e_gb=vals[1], e_dram=vals[2], e_mac=vals[3])


def _parse_int_list(text: str) -> tuple:
    return tuple(int(p) for p in text.split(","))


def _parse_range(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("range expects LO,HI")
    return int(parts[0]), int(parts[1])


def _budget_from_args(args) -> HardwareBudget:
    kw = {}
    if args.max_pes is not None:
        kw["max_pes"] = args.max_pes
    if args.max_storage_words is not None:
        kw["max_storage_words"] = args.max_storage_words
    if args.pe_range is not None:
        lo, hi = _parse_range(args.pe_range)
        kw["pe_x_range"] = (lo, hi)
        kw["pe_y_range"] = (lo, hi)
    if args.rf_choices is not None:
        kw["rf_choices"] = _parse_int_list(args.rf_choices)
    if args.gb_choices is not None:
        kw["gb_choices"] = _parse_int_list(args.gb_choices)
    return HardwareBudget(**kw) if kw else DEFAULT_BUDGET


def _resolve_workload(source: str) -> Workload:
    if source in builtin_names():
        return get_builtin(source)
    if Path(source).exists():
        return load_workload(source)
    raise ValueError(f"unknown workload {source!r}: not a builtin "
                     f"({', '.join(builtin_names())}) and no such file")


def _config_echo(args, command: str) -> dict:
    echo = {
        "command": command,
        "workload": args.workload,
        "seed": args.seed,
        "acq": args.acq,
        "lambda": args.lam,
        "pool_size": args.pool_size,
        "attempt_cap": args.attempt_cap,
        "sw_budget": args.sw_budget,
        "energy": vars(_parse_energy(args.energy)) if isinstance(args.energy, str)
                  else {"e_rf": args.energy.e_rf, "e_gb": args.energy.e_gb,
                        "e_dram": args.energy.e_dram, "e_mac": args.energy.e_mac},
    }
    if hasattr(args, "layer"):
        echo["layer"] = args.layer
    if hasattr(args, "hw_trials"):
        echo["hw_trials"] = args.hw_trials
        echo["baseline"] = bool(args.baseline)
        budget = _budget_from_args(args)
        echo["budget"] = {
            "max_pes": budget.max_pes,
            "max_storage_words": budget.max_storage_words,
            "pe_x_range": list(budget.pe_x_range),
            "pe_y_range": list(budget.pe_y_range),
            "rf_choices": list(budget.rf_choices),
            "gb_choices": list(budget.gb_choices),
        }
    return echo


# --- subcommands -----------------------------------------------------------

def cmd_eval(args) -> int:
    energy = _parse_energy(args.energy) if isinstance(args.energy, str) else args.energy
    workload = _resolve_workload(args.workload)
    layer = workload.layer(args.layer).shape
    mapping = mapping_from_dict(_load_json(args.mapping))
    if args.hardware is not None:
        hw = hardware_from_dict(_load_json(args.hardware), energy)
    else:
        hw = HardwareConfig(DEFAULT_HARDWARE.pe_x, DEFAULT_HARDWARE.pe_y,
                            DEFAULT_HARDWARE.rf_words, DEFAULT_HARDWARE.gb_words,
                            energy)
    report = validate_mapping(mapping, hw, layer)
    if not report.feasible:
        print(json.dumps(report_to_dict(report), indent=2, sort_keys=True))
        return 2
    res = evaluate_edp(mapping, hw, layer)
    print(json.dumps(_edp_result_to_dict(res), indent=2, sort_keys=True))
    return 0


def cmd_optimize_sw(args) -> int:
    energy = _parse_energy(args.energy)
    workload = _resolve_workload(args.workload)
    layer = workload.layer(args.layer).shape
    hw = HardwareConfig(DEFAULT_HARDWARE.pe_x, DEFAULT_HARDWARE.pe_y,
                        DEFAULT_HARDWARE.rf_words, DEFAULT_HARDWARE.gb_words, energy)
    if args.hardware is not None:
        hw = hardware_from_dict(_load_json(args.hardware), energy)
    acq = AcquisitionSpec(kind=args.acq, lam=args.lam)
    cfg = ProposerConfig(pool_size=args.pool_size, attempt_cap=args.attempt_cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    echo = _config_echo(args, "optimize-sw")
    echo["hardware"] = hardware_to_dict(hw)
    _dump_json(echo, out / "config.json")

    bo = optimizer.software_search(hw, layer, args.sw_budget, args.seed, acq=acq, cfg=cfg)
    rand = optimizer.random_search_sw(hw, layer, args.sw_budget, args.seed, cfg=cfg)
    (out / "bo_trace.csv").write_text(trace_to_csv(bo.trace))
    (out / "random_trace.csv").write_text(trace_to_csv(rand.trace))

    summary = {
        "config": echo,
        "bo": {"feasible": bo.feasible, "best_edp": bo.best_edp,
               "best_mapping": mapping_to_dict(bo.best_mapping) if bo.feasible else None,
               "trials": len(bo.trace.observations)},
        "random": {"feasible": rand.feasible, "best_edp": rand.best_edp,
                   "best_mapping": mapping_to_dict(rand.best_mapping) if rand.feasible else None,
                   "trials": len(rand.trace.observations)},
    }
    if not bo.feasible or not rand.feasible:
        summary["exhausted"] = True
        _dump_json(summary, out / "summary.json")
        return 2
    _dump_json(summary, out / "summary.json")
    return 0


def cmd_codesign(args) -> int:
    energy = _parse_energy(args.energy)
    workload = _resolve_workload(args.workload)
    budget = _budget_from_args(args)
    acq = AcquisitionSpec(kind=args.acq, lam=args.lam)
    cfg = ProposerConfig(pool_size=args.pool_size, attempt_cap=args.attempt_cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(_config_echo(args, "codesign"), out / "config.json")

    result = optimizer.codesign(workload, budget, args.hw_trials, args.sw_budget,
                                args.seed, acq=acq, cfg=cfg, energy=energy)
    (out / "hw_trace.csv").write_text(trace_to_csv(result.hw_trace))
    summary = {
        "workload": workload.name,
        "hw_trials_run": len(result.hw_trace.observations),
        "sw_trial_counts": [{label: len(res.trace.observations)
                             for label, res in layer_results.items()}
                            for layer_results in result.sw_traces],
        "best_total_edp": result.best_total_edp,
    }
    baseline = None
    if args.baseline:
        baseline = optimizer.random_search_hw(workload, budget, args.hw_trials,
                                              args.sw_budget, args.seed, acq=acq,
                                              cfg=cfg, energy=energy)
        (out / "baseline_hw_trace.csv").write_text(trace_to_csv(baseline.hw_trace))
        summary["baseline_best_total_edp"] = baseline.best_total_edp

    if result.best_hardware is None:
        summary["best_trial"] = None
        _dump_json(summary, out / "summary.json")
        return 2

    best = result.hw_trace.best()
    summary["best_trial"] = best.trial
    _dump_json(summary, out / "summary.json")
    _dump_json(hardware_to_dict(result.best_hardware), out / "best_hardware.json")
    _dump_json({label: mapping_to_dict(m) for label, m in result.best_mappings.items()},
               out / "best_mappings.json")
    for label, res in result.sw_traces[best.trial - 1].items():
        (out / f"sw_trace_{_safe_label(label)}.csv").write_text(trace_to_csv(res.trace))
    return 0


# --- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2 (2 means infeasible here)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--workload", required=True,
                   help="builtin workload name or JSON file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acq", choices=("ei", "lcb"), default="lcb")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="LCB exploration weight")
    p.add_argument("--pool-size", type=int, default=150)
    p.add_argument("--attempt-cap", type=int, default=1_000_000)
    p.add_argument("--sw-budget", type=int, default=optimizer.DEFAULT_SW_BUDGET)
    p.add_argument("--energy", default="1,6,200,1",
                   help="per-access energies e_rf,e_gb,e_dram,e_mac")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="accelbo",
                     description="Joint accelerator/mapping search with GP surrogates")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    ev = sub.add_parser("eval", help="score one mapping on one layer")
    ev.add_argument("--workload", required=True)
    ev.add_argument("--layer", required=True, help="layer label within the workload")
    ev.add_argument("--mapping", required=True, help="mapping JSON file")
    ev.add_argument("--hardware", help="hardware JSON file (default: 12x14 PEs, "
                    "128-word RF, 65536-word buffer)")
    ev.add_argument("--energy", default="1,6,200,1")
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("optimize-sw", help="mapping search plus random baseline")
    _add_common(sw)
    sw.add_argument("--layer", required=True)
    sw.add_argument("--hardware", help="hardware JSON file (default: 12x14 PEs)")
    sw.add_argument("--out", required=True, help="output directory")
    sw.set_defaults(func=cmd_optimize_sw)

    cd = sub.add_parser("codesign", help="joint hardware and mapping search")
    _add_common(cd)
    cd.add_argument("--hw-trials", type=int, default=optimizer.DEFAULT_HW_TRIALS)
    cd.add_argument("--baseline", action="store_true",
                    help="also run the random-hardware baseline")
    cd.add_argument("--max-pes", type=int)
    cd.add_argument("--max-storage-words", type=int)
    cd.add_argument("--pe-range", help="LO,HI bounds for both array sides")
    cd.add_argument("--rf-choices", help="comma-separated per-PE buffer sizes")
    cd.add_argument("--gb-choices", help="comma-separated global buffer sizes")
    cd.add_argument("--out", required=True, help="output directory")
    cd.set_defaults(func=cmd_codesign)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        detail = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"accelbo: error: {detail}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
