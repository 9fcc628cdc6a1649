"""siwkit command line: design, simulate, optimize, dispersion.

Exit codes: 0 success, 1 validation or design-rule failure, 2 solver
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import math
import re
import sys
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import presets
from .fdfd import SolverConfig, SolverError, extract_beta, simulate
from .geometry import (
    DeviceLayout,
    LayoutFormatError,
    generate_aperture_coupler,
    generate_circulator_skeleton,
    generate_rsiw,
    generate_tee_divider,
    parse_layout,
    validate_layout,
    write_layout,
)
from .network import (
    ScatteringData,
    insertion_loss_stats,
    metrics_report,
    phase_difference_curve,
    return_loss_bandwidth,
    to_db,
)
from .optimizer import TuningProblem, baseline_objective, default_xp_bounds, optimize_post
from .touchstone import export_csv, touchstone_name, write_touchstone
from .waveguide import (
    SiwSpec,
    Substrate,
    dispersion_curve,
    ferrite_radius,
    te_cutoff_frequency,
    validate_design_rules,
)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6}
FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


class UsageError(ValueError):
    pass


def _quantity(text: str, units: dict[str, float], kind: str) -> float:
    m = re.fullmatch(rf"\s*({_NUM})\s*([A-Za-z]*)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a {kind}: {text!r}")
    unit = m.group(2)
    key = unit.lower() if kind == "frequency" else unit
    if not unit:
        raise argparse.ArgumentTypeError(
            f"{kind} {text!r} needs a unit ({', '.join(_unit_names(kind))})"
        )
    if key not in units:
        raise argparse.ArgumentTypeError(f"unknown {kind} unit {unit!r} in {text!r}")
    # decimal scaling keeps "43.25mm" equal to the literal 43.25e-3
    return float(Decimal(m.group(1)) * Decimal(repr(units[key])))


def _unit_names(kind: str) -> list[str]:
    return ["mm", "m", "um"] if kind == "length" else ["GHz", "MHz", "kHz", "Hz"]


def parse_length(text: str) -> float:
    return _quantity(text, LENGTH_UNITS, "length")


def parse_frequency(text: str) -> float:
    return _quantity(text, FREQ_UNITS, "frequency")


def _pair(text: str, parse) -> tuple[float, float]:
    """'a:bUNIT' or 'aUNIT:bUNIT'; a bare first value takes the second's unit."""
    if text.count(":") != 1:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    a, b = text.split(":")
    hi = parse(b)
    unit = re.fullmatch(rf"\s*{_NUM}\s*([A-Za-z]*)\s*", b)
    if re.fullmatch(rf"\s*{_NUM}\s*", a) and unit:
        a = a.strip() + unit.group(1)
    return parse(a), hi


def parse_band(text: str) -> tuple[float, float]:
    lo, hi = _pair(text, parse_frequency)
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"band must satisfy 0 < lo < hi, got {text!r}")
    return lo, hi


def parse_length_range(text: str) -> tuple[float, float]:
    lo, hi = _pair(text, parse_length)
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _real(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


# ---------------------------------------------------------------- formatting

def fmt_length(v: float) -> str:
    return f"{v!r}m"


def fmt_freq(v: float) -> str:
    return f"{v!r}Hz"


def fmt_band(b: tuple[float, float]) -> str:
    return f"{b[0]!r}:{b[1]!r}Hz"


def fmt_range(b: tuple[float, float]) -> str:
    return f"{b[0]!r}:{b[1]!r}m"


# ------------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


PRESETS = {
    "paper-sband-rsiw": "rsiw",
    "paper-sband-divider": "divider",
    "paper-sband-coupler": "coupler",
    "paper-sband-circulator": "circulator",
}

# dest -> formatter for manifest output; bools handled separately
_FORMATTERS = {
    "wsiw": fmt_length, "d": fmt_length, "p": fmt_length, "h": fmt_length,
    "length": fmt_length, "arm": fmt_length, "r": fmt_length, "xp": fmt_length,
    "w_ap": fmt_length, "l_ap": fmt_length, "w_s": fmt_length, "l_s": fmt_length,
    "rf": fmt_length, "f0": fmt_freq, "field_freq": fmt_freq,
    "band": fmt_band, "xp_bounds": fmt_range,
}


def _add_guide(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("guide")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--wsiw", type=parse_length, help="post-row spacing (center to center)")
    g.add_argument("--d", type=parse_length, help="post diameter")
    g.add_argument("--p", type=parse_length, help="post pitch")
    g.add_argument("--er", type=_real, help="substrate relative permittivity")
    g.add_argument("--h", type=parse_length, help="substrate height")
    g.add_argument("--tand", type=_real, help="substrate loss tangent")


def _add_solver(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--cpw", type=_real, help="cells per guided wavelength (default 20)")
    g.add_argument("--cpd", type=_real, help="cells per post diameter (default 6)")
    g.add_argument("--pml-cells", type=_positive_int)
    g.add_argument("--workers", type=_positive_int)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="siwkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="generate a layout and a design report")
    d.add_argument("device", choices=["rsiw", "divider", "coupler", "circulator"])
    _common(d)
    _add_guide(d)
    d.add_argument("--band", type=parse_band)
    d.add_argument("--length", type=parse_length, help="rsiw length / coupler total length")
    d.add_argument("--arm", type=parse_length, help="divider or circulator arm length")
    d.add_argument("--r", type=parse_length, help="divider tuning post radius")
    d.add_argument("--xp", type=parse_length, help="divider tuning post offset from port 1")
    d.add_argument("--w-ap", type=parse_length, help="coupler aperture width")
    d.add_argument("--l-ap", type=parse_length, help="coupler aperture wall inset")
    d.add_argument("--w-s", type=parse_length, help="coupler port spacing section width")
    d.add_argument("--l-s", type=parse_length, help="coupler port spacing section length")
    d.add_argument("--f0", type=parse_frequency, help="circulator center frequency")
    d.add_argument("--ef", type=_real, help="ferrite relative permittivity")
    d.add_argument("--rf", type=parse_length, help="ferrite radius override")
    d.add_argument("--allow-violations", action="store_true")

    s = sub.add_parser("simulate", help="frequency sweep of a layout file")
    _common(s)
    s.add_argument("--layout", help="SIWLAYOUT file")
    s.add_argument("--band", type=parse_band)
    s.add_argument("--points", type=_positive_int)
    s.add_argument("--formats", help="comma list of touchstone,csv,fieldmap,metrics")
    s.add_argument("--field-freq", type=parse_frequency, help="frequency for field maps")
    _add_solver(s)

    o = sub.add_parser("optimize", help="tune the divider's inductive post")
    o.add_argument("device", choices=["divider"])
    _common(o)
    _add_guide(o)
    o.add_argument("--band", type=parse_band)
    o.add_argument("--arm", type=parse_length)
    o.add_argument("--r", type=parse_length, help="post radius (repeat the run for others)")
    o.add_argument("--xp-bounds", type=parse_length_range)
    o.add_argument("--points", type=_positive_int, help="frequency points per evaluation")
    o.add_argument("--dense-points", type=_positive_int, help="verification sweep points")
    o.add_argument("--coarse", type=_positive_int, help="coarse grid points")
    _add_solver(o)

    x = sub.add_parser("dispersion", help="analytic versus solver phase constant")
    _common(x)
    _add_guide(x)
    x.add_argument("--band", type=parse_band)
    x.add_argument("--points", type=_positive_int)
    _add_solver(x)
    return parser


def read_config(path: str) -> list[tuple[str, str]]:
    items = []
    text = Path(path).read_text(encoding="utf-8")
    for k, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        items.append((key.replace("_", "-"), value))
    return items


def parse_arguments(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    # Config entries are replayed as flags ahead of the command line, so
    # explicit flags win.
    npos = 2 if args.command in ("design", "optimize") else 1
    start = next(i for i, a in enumerate(argv) if a == args.command)
    head, rest = argv[: start + npos], argv[start + npos:]
    extra: list[str] = []
    for key, value in read_config(args.config):
        if key == "command":
            if value != args.command:
                raise UsageError(f"config is for command {value!r}, not {args.command!r}")
            continue
        if key == "device":
            if value != getattr(args, "device", None):
                raise UsageError(f"config is for device {value!r}")
            continue
        if key == "config":
            continue
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                extra.append(f"--{key}")
            continue
        extra.append(f"--{key}={value}")
    return parser.parse_args(head + extra + rest)


# ------------------------------------------------------------------ helpers

def _guide(args) -> SiwSpec:
    base = presets.RSIW
    sub = Substrate(
        h=args.h if args.h is not None else base.substrate.h,
        eps_r=args.er if args.er is not None else base.substrate.eps_r,
        tan_d=args.tand if args.tand is not None else base.substrate.tan_d,
    )
    return SiwSpec(
        sub,
        d=args.d if args.d is not None else base.d,
        p=args.p if args.p is not None else base.p,
        w_siw=args.wsiw if args.wsiw is not None else base.w_siw,
    )


def _solver_config(args) -> SolverConfig:
    kw = {}
    for dest, field in (("cpw", "cells_per_wavelength"), ("cpd", "cells_per_diameter"),
                        ("pml_cells", "pml_cells"), ("workers", "workers")):
        if getattr(args, dest, None) is not None:
            kw[field] = getattr(args, dest)
    return SolverConfig(**kw)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, args, inputs: dict[str, Path], outputs: list[str],
                   complete: bool = True) -> None:
    lines = ["# siwkit run manifest; usable as --config to rerun"]
    lines.append(f"command = {args.command}")
    if getattr(args, "device", None):
        lines.append(f"device = {args.device}")
    for key in sorted(vars(args)):
        if key in ("command", "device", "config", "verbose"):
            continue
        v = getattr(args, key)
        if v is None or v is False:
            continue
        if v is True:
            text = "true"
        elif key in _FORMATTERS:
            text = _FORMATTERS[key](v)
        else:
            text = str(v)
        lines.append(f"{key.replace('_', '-')} = {text}")
    lines.append(f"# complete = {'true' if complete else 'false'}")
    for name, path in sorted(inputs.items()):
        lines.append(f"# input {name} sha256 = {_sha256(path)}")
    for name in outputs:
        lines.append(f"# output {name} sha256 = {_sha256(out / name)}")
    (out / "run-manifest.txt").write_text("\n".join(lines) + "\n", encoding="ascii")


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str, written: list[str]) -> None:
    (out / name).write_text(text, encoding="ascii", newline="\n")
    written.append(name)


def sweep_metrics(data: ScatteringData, band: tuple[float, float]) -> str:
    n = data.nports
    items = []
    bw = return_loss_bandwidth(data, 1, band)
    items.append(("s11_bandwidth_pct", bw.fractional_bandwidth, "%"))
    items.append(("s11_max_db", bw.worst_db, "dB"))
    for j in range(2, n + 1):
        lo, hi, mean = insertion_loss_stats(data, 1, j, band)
        items += [(f"s{j}1_min_db", lo, "dB"), (f"s{j}1_max_db", hi, "dB"),
                  (f"s{j}1_mean_db", mean, "dB")]
    if n == 3:
        diff = np.abs(data.db(2, 1) - data.db(3, 1))[data.restrict(band)]
        items.append(("s21_minus_s31_max_db", float(diff.max()), "dB"))
    if n == 4:
        q = (band[1] - band[0]) / 4
        mid = data.restrict((band[0] + q, band[1] - q))
        if mid.any():
            ph = phase_difference_curve(data, 2, 3, 1)[mid]
            items += [("phase_diff_deg_min", float(ph.min()), "deg"),
                      ("phase_diff_deg_max", float(ph.max()), "deg"),
                      ("phase_diff_deg_range", float(ph.max() - ph.min()), "deg")]
    return metrics_report(items)


def _emit_sweep(out: Path, data: ScatteringData, band, formats, written) -> None:
    if "touchstone" in formats:
        _write(out, touchstone_name("sweep", data.nports), write_touchstone(data), written)
    if "csv" in formats:
        _write(out, "sweep.csv", export_csv(data), written)
    if "metrics" in formats:
        _write(out, "metrics.txt", sweep_metrics(data, band), written)


# ----------------------------------------------------------------- commands

def _design_layout(args, spec: SiwSpec, report: list[str]) -> DeviceLayout:
    dev = args.device
    if dev == "rsiw":
        length = args.length if args.length is not None else presets.RSIW_LENGTH
        return generate_rsiw(spec, length)
    if dev == "divider":
        arm = args.arm if args.arm is not None else presets.DIVIDER["arm_length"]
        r = args.r if args.r is not None else presets.DIVIDER["post_radius"]
        xp = args.xp if args.xp is not None else presets.DIVIDER["post_offset"]
        report.append(f"tuning post: r = {r * 1e3:.4g} mm, x_p = {xp * 1e3:.4g} mm")
        return generate_tee_divider(spec, arm, r, xp)
    if dev == "coupler":
        c = presets.COUPLER
        pick = lambda v, k: v if v is not None else c[k]  # noqa: E731
        return generate_aperture_coupler(
            spec, pick(args.length, "total_length"), pick(args.w_ap, "w_ap"),
            pick(args.l_ap, "l_ap"), pick(args.w_s, "w_s"), pick(args.l_s, "l_s"),
        )
    c = presets.CIRCULATOR
    f0 = args.f0 if args.f0 is not None else 2.5e9
    ef = args.ef if args.ef is not None else c["eps_f"]
    rf_res = ferrite_radius(f0, ef)
    report.append(f"R_f = {rf_res * 1e3:.3f} mm (first J1' resonance at {f0 / 1e9:.4g} GHz, "
                  f"eps_f = {ef:.4g})")
    report.append(
        f"note: the reference S-band circulator uses a {c['ferrite_radius'] * 1e3:.4g} mm "
        f"ferrite; the resonance formula gives {rf_res * 1e3:.3f} mm, so the two differ by "
        f"{100 * (rf_res / c['ferrite_radius'] - 1):.0f}%"
    )
    if args.rf is not None:
        rf = args.rf
    elif args.preset == "paper-sband-circulator":
        rf = c["ferrite_radius"]
    else:
        rf = rf_res
    report.append(f"layout ferrite radius = {rf * 1e3:.4g} mm")
    arm = args.arm if args.arm is not None else c["arm_length"]
    return generate_circulator_skeleton(spec, arm, rf, ef)


def cmd_design(args) -> int:
    if args.preset and PRESETS[args.preset] != args.device:
        raise UsageError(f"preset {args.preset} is not a {args.device} preset")
    spec = _guide(args)
    band = args.band or presets.BAND
    guide = spec.equivalent_guide()
    rules = validate_design_rules(spec, band)
    report = [
        f"device = {args.device}",
        f"W_eq = {spec.w_eq * 1e3:.2f} mm",
        f"TE10 cutoff = {te_cutoff_frequency(guide, 1) / 1e9:.4f} GHz",
        f"TE20 cutoff = {te_cutoff_frequency(guide, 2) / 1e9:.4f} GHz",
        rules.format(),
    ]
    if not rules.passed and not args.allow_violations:
        print("\n".join(report))
        print("design rejected (use --allow-violations to write it anyway)", file=sys.stderr)
        return EXIT_INVALID
    layout = _design_layout(args, spec, report)
    problems = validate_layout(layout)
    for v in problems:
        report.append(f"layout violation [{v.kind}]: {v.message}")
    text = "\n".join(report) + "\n"
    print(text, end="")
    if problems:
        return EXIT_INVALID
    out = _out_dir(args)
    written: list[str] = []
    _write(out, "layout.siw", write_layout(layout), written)
    _write(out, "design.txt", text, written)
    write_manifest(out, args, {}, written)
    return EXIT_OK


FORMATS = ("touchstone", "csv", "fieldmap", "metrics")


def cmd_simulate(args) -> int:
    if not args.layout:
        raise UsageError("--layout is required")
    band = args.band or presets.BAND
    points = args.points or 51
    if points < 2:
        raise UsageError("--points must be >= 2")
    formats = tuple(f.strip() for f in (args.formats or "touchstone,csv,metrics").split(","))
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise UsageError(f"unknown output format(s) {bad}; choose from {FORMATS}")
    path = Path(args.layout)
    layout = parse_layout(path.read_text(encoding="utf-8"))
    problems = validate_layout(layout)
    if problems:
        for v in problems:
            print(f"layout violation [{v.kind}]: {v.message}", file=sys.stderr)
        return EXIT_INVALID
    freqs = np.linspace(band[0], band[1], points)
    field_at = []
    if "fieldmap" in formats:
        f_field = args.field_freq or 0.5 * (band[0] + band[1])
        field_at = [int(np.argmin(np.abs(freqs - f_field)))]
    out = _out_dir(args)
    res = simulate(layout, freqs, _solver_config(args), field_at=field_at, partial=True)
    written: list[str] = []
    data = res.data
    part_band = (band[0], data.frequencies[-1]) if not res.complete else band
    if len(data.frequencies) >= 2:
        _emit_sweep(out, data, part_band, formats, written)
    for (k, pid), fm in sorted(res.fields.items()):
        stem = f"field_f{k}_p{pid}"
        _write(out, stem + ".csv", fm.to_csv(), written)
        _write(out, stem + ".pgm", fm.to_pgm(), written)
    write_manifest(out, args, {"layout": path}, written, res.complete)
    if not res.complete:
        err = res.error
        print(f"siwkit: solver failure: {err}; "
              f"{len(data.frequencies)} of {points} points written", file=sys.stderr)
        return EXIT_SOLVER
    if "metrics" in formats:
        print((out / "metrics.txt").read_text(), end="")
    return EXIT_OK


def cmd_optimize(args) -> int:
    if args.preset and PRESETS[args.preset] != "divider":
        raise UsageError(f"preset {args.preset} is not a divider preset")
    spec = _guide(args)
    band = args.band or presets.BAND
    arm = args.arm if args.arm is not None else presets.DIVIDER["arm_length"]
    r = args.r if args.r is not None else presets.DIVIDER["post_radius"]
    bounds = args.xp_bounds or default_xp_bounds(spec, arm, r)
    config = _solver_config(args)
    guide = spec.equivalent_guide()
    if band[0] <= te_cutoff_frequency(guide, 1):
        raise UsageError("objective band reaches below the TE10 cutoff")
    problem = TuningProblem(
        spec, arm, bounds, (r,), band, args.points or 11, config,
        coarse_points=args.coarse or 9,
    )
    baseline = baseline_objective(problem)
    result = optimize_post(problem)
    out = _out_dir(args)
    written: list[str] = []
    _write(out, "history.csv", result.history_csv(), written)
    best = metrics_report([
        ("x_p", result.x_p * 1e3, "mm"),
        ("r", result.r * 1e3, "mm"),
        ("objective_db", result.objective, "dB"),
        ("baseline_db", baseline, "dB"),
        ("evaluations", len(result.history), ""),
        ("converged", float(result.converged), ""),
    ])
    _write(out, "best.txt", best, written)
    layout = generate_tee_divider(spec, arm, result.r, result.x_p)
    _write(out, "layout.siw", write_layout(layout), written)
    dense = args.dense_points or 51
    if dense >= 2:
        data = simulate(layout, np.linspace(band[0], band[1], dense), config).data
        _emit_sweep(out, data, band, ("touchstone", "csv", "metrics"), written)
    write_manifest(out, args, {}, written)
    print(best, end="")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    if args.preset and PRESETS[args.preset] != "rsiw":
        raise UsageError(f"preset {args.preset} is not a guide preset")
    spec = _guide(args)
    band = args.band or presets.BAND
    points = args.points or 19
    if points < 2:
        raise UsageError("--points must be >= 2")
    guide = spec.equivalent_guide()
    fc = te_cutoff_frequency(guide, 1)
    if band[0] <= fc:
        raise UsageError(
            f"band starts at or below the TE10 cutoff {fc / 1e9:.4g} GHz; no guided mode to extract"
        )
    table = extract_beta(spec, band, points, _solver_config(args))
    analytic = dispersion_curve(guide, band, (1,), points).beta[:, 0]
    extracted = table.beta[:, 0]
    rel = (extracted - analytic) / analytic
    lines = ["freq_hz,beta_analytic,beta_extracted,rel_err"]
    for f, a, e, q in zip(table.frequencies, analytic, extracted, rel):
        lines.append(f"{f:.9g},{a:.9g},{e:.9g},{q:.9g}")
    out = _out_dir(args)
    written: list[str] = []
    _write(out, "dispersion.csv", "\n".join(lines) + "\n", written)
    write_manifest(out, args, {}, written)
    print(f"max |rel_err| = {np.max(np.abs(rel)):.4g}")
    return EXIT_OK


COMMANDS = {"design": cmd_design, "simulate": cmd_simulate, "optimize": cmd_optimize,
            "dispersion": cmd_dispersion}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_arguments(argv)
    except UsageError as exc:
        print(f"siwkit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"siwkit: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"siwkit: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, LayoutFormatError, ValueError) as exc:
        print(f"siwkit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"siwkit: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
