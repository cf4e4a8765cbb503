"""Command-line front end.

Exit codes: 0 success, 2 bad parameters, 3 input-format error,
4 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import coincidence as co
from .errors import BadParamsError, ItdError, NumericalGuardError
from .momentum import (
    BOUND_VARIANTS,
    avg_uncertainty,
    momentum_itd_sequential,
    precision_bound,
)
from .montecarlo import (
    DEFAULT_G0,
    DEFAULT_GROUP_SIZE,
    DEFAULT_NU,
    DEFAULT_REPETITIONS,
    MODES,
    TimestampSynthConfig,
    run_sweep,
    synthesize_timestamps,
)
from .physics import DEFAULT_BASIS, build_lz, sequential_config, single_shot_config
from .stats import cfi, experimental_bound, probs_closed, probs_simulated, qfi_ensemble

OUT_ENV = "ITD_METROLOGY_OUT"
EXPERIMENTAL_VARIANTS = ("single-T", "sequential-N")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def parse_range(text: str) -> list[int]:
    """``"1..4"`` -> [1, 2, 3, 4]; ``"1,3"`` -> [1, 3]; ``"2"`` -> [2]."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def out_dir(args) -> Path | None:
    target = args.out or os.environ.get(OUT_ENV)
    if target is None:
        return None
    p = Path(target)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_manifest(directory: Path, name: str, args, argv, outputs) -> Path:
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "argv": list(argv),
        "outputs": [str(p) for p in outputs],
    }
    path = directory / f"{name}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def emit(args, argv, name: str, files: dict[str, str], stdout_text: str | None = None):
    """Print ``stdout_text`` and, when an output directory is set, write files plus a manifest."""
    if stdout_text is not None:
        sys.stdout.write(stdout_text)
    directory = out_dir(args)
    if directory is None:
        return
    paths = []
    for fname, text in files.items():
        p = directory / fname
        p.write_text(text)
        paths.append(p)
    write_manifest(directory, name, args, argv, paths)


def axis_values(args, mode_or_variant: str) -> list[int]:
    if mode_or_variant.endswith("-T"):
        if args.t is None:
            raise BadParamsError(f"{mode_or_variant} needs --t")
        return args.t
    if args.n is None:
        raise BadParamsError(f"{mode_or_variant} needs --n")
    return args.n


def cmd_bounds(args, argv):
    xs = axis_values(args, args.variant)
    rows = []
    for x in xs:
        if args.variant in EXPERIMENTAL_VARIANTS:
            b = experimental_bound(args.variant, args.nu, x)
        elif args.variant.endswith("-T"):
            b = precision_bound(args.variant, args.nu, args.dv, t=x)
        else:
            b = precision_bound(args.variant, args.nu, args.dv, n=x)
        rows.append((x, b))
    text = csv_text(["x", "bound"], rows)
    emit(args, argv, "bounds", {"bounds.csv": text}, text)


def scheme_for(mode: str, param: float, x: int):
    if mode == "single-T":
        return single_shot_config(param, x, DEFAULT_BASIS)
    return sequential_config(param, x, DEFAULT_BASIS)


def closed_for(mode: str, param: float, x: int):
    if mode == "single-T":
        return probs_closed(param, x, x, 1)
    return probs_closed(param, 1.0, 1.0, x)


def cmd_probs(args, argv):
    xs = axis_values(args, args.mode)
    header = ["x", "param", "p_plus", "p_minus"]
    if args.simulate:
        header += ["p_plus_sim", "p_minus_sim", "delta"]
    rows = []
    for param in args.param:
        for x in xs:
            p = closed_for(args.mode, param, x)
            row = [x, param, p.p_plus, p.p_minus]
            if args.simulate:
                ps = probs_simulated(scheme_for(args.mode, param, x))
                row += [ps.p_plus, ps.p_minus, abs(ps.p_plus - p.p_plus)]
            rows.append(row)
    text = csv_text(header, rows)
    emit(args, argv, "probs", {"probs.csv": text}, text)


def fisher_row(mode: str, param: float, x: int):
    cfg = scheme_for(mode, param, x)
    f_c = cfi(lambda g: probs_simulated(scheme_for(mode, g, x)), param)
    k = momentum_itd_sequential(cfg.n_iter * cfg.t_s * build_lz(cfg.basis), cfg.n_iter, cfg.t_c, cfg.t_s)
    ens = cfg.joint_ensemble()
    f_q = qfi_ensemble(ens, k)
    four_dk2 = 4.0 * avg_uncertainty(ens, k) ** 2
    if not (f_c <= f_q + 1e-6 and f_q <= four_dk2 + 1e-9):
        raise NumericalGuardError(
            f"Fisher ordering violated at x={x}: cfi={f_c}, qfi={f_q}, 4dK^2={four_dk2}"
        )
    return f_c, f_q, four_dk2


def cmd_fisher(args, argv):
    xs = axis_values(args, args.mode)
    rows = [(x, *fisher_row(args.mode, args.param, x)) for x in xs]
    text = csv_text(["x", "cfi", "qfi", "four_dk2"], rows)
    emit(args, argv, "fisher", {"fisher.csv": text}, text)


def cmd_sweep(args, argv):
    res = run_sweep(
        args.mode,
        grid=args.grid,
        nu=args.nu,
        repetitions=args.reps,
        group_size=args.group,
        seed=args.seed,
        g0=args.g0,
        zero_noise=args.zero_noise,
        workers=args.workers,
    )
    stem = f"sweep_{args.mode}"
    emit(args, argv, stem, {f"{stem}.csv": res.to_csv(), f"{stem}.json": res.to_json() + "\n"}, res.to_csv())


def cmd_synth(args, argv):
    p_plus = args.p_plus
    if args.mode is not None:
        x = args.x if args.x is not None else 1
        p_plus = closed_for(args.mode, args.param, x).p_plus
    cfg = TimestampSynthConfig(
        duration=int(round(args.duration_ms * 1e9)),
        pair_rate=args.pair_rate,
        herald_delay=args.herald_delay,
        signal_delay=args.signal_delay,
        jitter_sigma=args.jitter,
        dark_rate=tuple(args.dark_rate) if len(args.dark_rate) == 3 else (args.dark_rate[0],) * 3,
        p_plus=p_plus,
        seed=args.seed,
    )
    streams = synthesize_timestamps(cfg)
    buf = io.StringIO()
    co.write_timestamps(streams, buf)
    if args.out is None and os.environ.get(OUT_ENV) is None:
        sys.stdout.write(buf.getvalue())
        return
    emit(args, argv, "synth", {"timestamps.csv": buf.getvalue()})


def cmd_coincide(args, argv):
    streams = co.read_timestamps(args.input)
    kw = dict(delay_min=args.delay_min, delay_max=args.delay_max, step=args.step, gate=args.gate)
    files = {}
    if args.segment_ms is not None:
        segments = co.segment_streams(streams, int(round(args.segment_ms * 1e9)), args.segments)
        hists = [co.coincidences(seg, **kw) for seg in segments]
        seg_rows = []
        for k, h in enumerate(hists):
            (d2, c2), (d3, c3) = co.peak_extract(h[2]), co.peak_extract(h[3])
            seg_rows.append((k, c2, c3, d2, d3))
        files["segments.csv"] = csv_text(
            ["segment", "nu_plus", "nu_minus", "peak_delay_ps_2_1", "peak_delay_ps_3_1"], seg_rows
        )
        if hists:
            total = {ch: sum((h[ch] for h in hists[1:]), hists[0][ch]) for ch in co.SIGNAL_CHANNELS}
        else:
            total = co.coincidences({}, **kw)
    else:
        total = co.coincidences(streams, **kw)
    summary = {}
    for ch in co.SIGNAL_CHANNELS:
        files[f"hist_{ch}_1.csv"] = total[ch].to_csv()
        d, c = co.peak_extract(total[ch])
        summary[f"{ch}-1"] = {"peak_delay_ps": d, "peak_count": c}
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    files["summary.json"] = text
    emit(args, argv, "coincide", files, text)


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    return main(manifest["argv"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="itd-metrology", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, stochastic=False):
        p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV}, else stdout only)")
        if stochastic:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bounds", help="precision bounds over a T or N range")
    p.add_argument("--variant", required=True, choices=BOUND_VARIANTS + EXPERIMENTAL_VARIANTS)
    p.add_argument("--dv", type=float, default=0.0, help="maximum uncertainty of V_S")
    p.add_argument("--nu", type=float, default=DEFAULT_NU)
    p.add_argument("--t", type=parse_range)
    p.add_argument("--n", type=parse_range)
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("probs", help="outcome probabilities, closed form and simulated")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--param", "--g", "--alpha", dest="param", type=parse_float_list,
                   default=[DEFAULT_G0], help="g (single-T) or alpha (sequential-N); comma list")
    p.add_argument("--t", type=parse_range)
    p.add_argument("--n", type=parse_range)
    p.add_argument("--simulate", action="store_true")
    common(p)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("fisher", help="classical and quantum Fisher information")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--param", "--g", "--alpha", dest="param", type=float, default=DEFAULT_G0)
    p.add_argument("--t", type=parse_range)
    p.add_argument("--n", type=parse_range)
    common(p)
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("sweep", help="Monte Carlo RMSE sweep")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--grid", type=parse_range, default=[1, 2, 3, 4])
    p.add_argument("--nu", type=int, default=DEFAULT_NU)
    p.add_argument("--reps", type=int, default=DEFAULT_REPETITIONS)
    p.add_argument("--group", type=int, default=DEFAULT_GROUP_SIZE)
    p.add_argument("--g0", type=float, default=DEFAULT_G0)
    p.add_argument("--zero-noise", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    common(p, stochastic=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="synthesize a three-channel timestamp file")
    p.add_argument("--duration-ms", type=float, default=50.0)
    p.add_argument("--pair-rate", type=float, default=40_000.0, help="pairs per second")
    p.add_argument("--herald-delay", type=int, default=0)
    p.add_argument("--signal-delay", type=int, default=10_000)
    p.add_argument("--jitter", type=float, default=0.0, help="gaussian jitter sigma, ps")
    p.add_argument("--dark-rate", type=parse_float_list, default=[0.0], help="one rate or three, per second")
    p.add_argument("--p-plus", type=float, default=0.5)
    p.add_argument("--mode", choices=MODES, default=None, help="derive p_plus from the scheme")
    p.add_argument("--param", "--g", "--alpha", dest="param", type=float, default=DEFAULT_G0)
    p.add_argument("--x", type=int, default=None, help="T or N for --mode")
    common(p, stochastic=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("coincide", help="coincidence histograms from a timestamp file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--delay-min", type=int, default=co.DEFAULT_DELAY_MIN)
    p.add_argument("--delay-max", type=int, default=co.DEFAULT_DELAY_MAX)
    p.add_argument("--step", type=int, default=co.DEFAULT_STEP)
    p.add_argument("--gate", type=int, default=co.DEFAULT_GATE)
    p.add_argument("--segment-ms", type=float, default=None)
    p.add_argument("--segments", type=int, default=None, help="number of segments (default: cover the data)")
    common(p)
    p.set_defaults(func=cmd_coincide)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args, argv)
    except ItdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
