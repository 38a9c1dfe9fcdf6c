"""Command-line entry point: ``flyback-mi {simulate,sweep,bode,thd}``.

Exit codes: 0 success, 1 configuration or argument error, 2 numerical
failure, 3 THD compliance failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import AnalysisError, harmonic_amplitudes, read_waveform_csv, thd, write_waveform_csv
from .config import Scenario, load_config, parse_value
from .filters import FilterKind, network_transfer, transfer_magnitude
from .simulator import (ConfigError, SimulationError, calibrate_modulation_index, efficiency,
                        energy_audit, run)
from .sweep import compliance_check, format_csv, run_sweep, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_COMPLIANCE = 0, 1, 2, 3

log = logging.getLogger("flyback_mi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _scenario(path) -> Scenario:
    return load_config(path) if path else Scenario()


def _positive(text):
    """Positive number; engineering suffixes as in config files."""
    try:
        v = parse_value(text)
    except ConfigError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def full_band_h(f_sw: float, f0: float) -> int:
    """Harmonic order reaching twice the switching frequency."""
    return int(2.0 * f_sw / f0)


def cmd_simulate(args) -> int:
    scn = _scenario(args.config)
    cfg = scn.config_for(args.filter, args.r1)
    t = time.perf_counter()
    m = calibrate_modulation_index(cfg, args.power)
    res = run(cfg.with_m(m))
    spec = harmonic_amplitudes(res.grid_current, cfg.grid.f0, scn.h_max)
    thd_pct = 100.0 * thd(spec)
    h_full = min(full_band_h(cfg.modulator.f_sw, cfg.grid.f0),
                 int(0.5 / (cfg.dt * cfg.grid.f0)) - 1)
    thd_full = 100.0 * thd(harmonic_amplitudes(res.grid_current, cfg.grid.f0, h_full))
    audit = energy_audit(res)
    print(f"filter          {cfg.filter.kind.value}")
    print(f"r1              {cfg.flyback.r1:g} ohm")
    print(f"target power    {args.power:g} W")
    print(f"mod index       {m:.6f}")
    print(f"p_in            {res.p_in:.4f} W")
    print(f"p_out           {res.p_out:.4f} W")
    print(f"efficiency      {efficiency(res):.5f}")
    print(f"THD (h<={scn.h_max:<4d})   {thd_pct:.3f} %  "
          f"({'compliant' if compliance_check(thd_pct) else 'NOT compliant'})")
    print(f"THD (h<={h_full:<4d})   {thd_full:.3f} %")
    print(f"I1 rms          {spec.amplitudes[1] / np.sqrt(2):.4f} A")
    print("losses          " + ", ".join(f"{k} {v:.3f} W" for k, v in res.losses.items()))
    print(f"audit residual  {audit.residual:.3e} W")
    print("mode fractions  " + ", ".join(f"{k} {v:.3f}" for k, v in res.mode_fractions.items()))
    print(f"elapsed         {time.perf_counter() - t:.1f} s")
    if args.dump_waveforms:
        out = Path(args.dump_waveforms)
        out.mkdir(parents=True, exist_ok=True)
        for name, ts in (("grid_current", res.grid_current), ("grid_voltage", res.grid_voltage),
                         ("dc_current", res.dc_current), ("i_m", res.i_m_trace)):
            write_waveform_csv(ts, out / f"{name}.csv")
        print(f"waveforms       {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scn = _scenario(args.config)
    t = time.perf_counter()
    rows = run_sweep(scn, jobs=args.jobs)
    log.info("sweep of %d points took %.1f s", len(rows), time.perf_counter() - t)
    if args.csv:
        write_csv(rows, args.csv)
    else:
        sys.stdout.write(format_csv(rows))
    if args.plots:
        from .plots import render_plots
        if any(r.ok for r in rows):
            render_plots(rows, args.plots)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"failed: {r.filter_kind.value} r1={r.r1_ohm:g} P={r.p_target_w:g}: {r.error}",
              file=sys.stderr)
    if failed:
        return EXIT_NUMERIC
    if (args.strict or scn.strict) and not all(r.compliant for r in rows):
        bad = sum(not r.compliant for r in rows)
        print(f"{bad} of {len(rows)} points exceed the THD limit", file=sys.stderr)
        return EXIT_COMPLIANCE
    return EXIT_OK


def cmd_bode(args) -> int:
    if not args.fmax > args.fmin:
        raise ConfigError("--fmax must exceed --fmin")
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    fp = _scenario(args.config).filter_params(args.filter)
    f = np.geomspace(args.fmin, args.fmax, args.points)
    gain = network_transfer(fp, f)
    lines = ["f_hz,gain_ideal,gain_network,phase_network_deg"]
    for fi, g in zip(f, gain):
        lines.append(f"{fi:.6g},{transfer_magnitude(fp, fi):.6g},{abs(g):.6g},"
                     f"{np.degrees(np.angle(g)):.6g}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_thd(args) -> int:
    ts = read_waveform_csv(args.input)
    spec = harmonic_amplitudes(ts, args.f0, args.hmax)
    thd_pct = 100.0 * thd(spec)
    print(f"THD {thd_pct:.4f} % (h <= {args.hmax}, f0 = {args.f0:g} Hz, "
          f"fundamental {spec.amplitudes[1]:.6g} peak)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flyback-mi", description="Flyback microinverter simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="calibrate and run one operating point")
    s.add_argument("--config", help="scenario file")
    s.add_argument("--filter", type=FilterKind.parse, default=FilterKind.CL, help="cl or lcl")
    s.add_argument("--r1", type=_positive, help="primary winding resistance (ohm)")
    s.add_argument("--power", type=_positive, default=100.0, help="target output power (W)")
    s.add_argument("--dump-waveforms", metavar="DIR", help="write captured waveforms as CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run the filter x r1 x power sweep")
    s.add_argument("--config", help="scenario file")
    s.add_argument("--csv", metavar="PATH", help="report path (default: stdout)")
    s.add_argument("--plots", metavar="DIR", help="write SVG charts here")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--strict", action="store_true", help="exit 3 if any point fails THD")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bode", help="filter current gain versus frequency (CSV)")
    s.add_argument("--config", help="scenario file")
    s.add_argument("--filter", type=FilterKind.parse, default=FilterKind.CL)
    s.add_argument("--fmin", type=_positive, default=10.0)
    s.add_argument("--fmax", type=_positive, default=100e3)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--output", metavar="PATH", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_bode)

    s = sub.add_parser("thd", help="THD of a t_s,value waveform CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--f0", type=_positive, default=50.0)
    s.add_argument("--hmax", type=int, default=40)
    s.set_defaults(func=cmd_thd)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, AnalysisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
