"""Sweep harness: filter x r1 x target power, with CSV reports.

Points sharing a filter and an r1 value are run by one worker so that their
modulation-index calibrations can reuse each other's simulations.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis import harmonic_amplitudes, thd
from .config import Scenario
from .filters import FilterKind
from .simulator import (SimulationError, calibrate_modulation_index, efficiency,
                        energy_audit, run)

log = logging.getLogger(__name__)

#: THD bound in percent (strict inequality)
THD_LIMIT_PCT = 5.0

CSV_HEADER = ("filter,r1_ohm,p_target_w,p_in_w,p_out_w,efficiency,thd_pct,"
              "i1_rms_a,mod_index,compliant")


def compliance_check(thd_pct: float) -> bool:
    """True when total THD is strictly below the 5 % limit."""
    return thd_pct < THD_LIMIT_PCT


@dataclass(frozen=True)
class ReportRow:
    """One sweep point. Failed points carry NaN numbers and an ``error`` text.

    ``audit_residual_w`` and ``error`` are diagnostics and are not written to
    the CSV report.
    """

    filter_kind: FilterKind
    r1_ohm: float
    p_target_w: float
    p_in_w: float
    p_out_w: float
    efficiency: float
    thd_pct: float
    i1_rms_a: float
    mod_index: float
    compliant: bool
    audit_residual_w: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def key(self):
        return (self.filter_kind.value, self.r1_ohm, self.p_target_w)


def failed_row(kind: FilterKind, r1: float, power: float, error: str) -> ReportRow:
    nan = math.nan
    return ReportRow(kind, r1, power, nan, nan, nan, nan, nan, nan, False, nan, error)


def run_point(scn: Scenario, kind, r1: float, power: float,
              cache: dict | None = None) -> ReportRow:
    """Calibrate to ``power``, run once more at that index and tabulate."""
    kind = FilterKind.parse(kind)
    cfg = scn.config_for(kind, r1)
    m = calibrate_modulation_index(cfg, power, cache=cache)
    res = run(cfg.with_m(m))
    spec = harmonic_amplitudes(res.grid_current, cfg.grid.f0, scn.h_max)
    thd_pct = 100.0 * thd(spec, scn.h_max)
    return ReportRow(
        filter_kind=kind,
        r1_ohm=r1,
        p_target_w=power,
        p_in_w=res.p_in,
        p_out_w=res.p_out,
        efficiency=efficiency(res),
        thd_pct=thd_pct,
        i1_rms_a=spec.amplitudes[1] / math.sqrt(2.0),
        mod_index=m,
        compliant=compliance_check(thd_pct),
        audit_residual_w=energy_audit(res).residual,
    )


def _run_group(scn: Scenario, kind: FilterKind, r1: float) -> list[ReportRow]:
    cache: dict = {}
    rows = []
    for power in scn.sweep_power:
        try:
            row = run_point(scn, kind, r1, power, cache)
        except (SimulationError, ValueError) as exc:
            log.warning("%s r1=%g P=%g failed: %s", kind.value, r1, power, exc)
            row = failed_row(kind, r1, power, f"{type(exc).__name__}: {exc}")
        else:
            log.info("%s r1=%g P=%g: eff=%.4f thd=%.3f%% m=%.4f", kind.value, r1, power,
                     row.efficiency, row.thd_pct, row.mod_index)
        rows.append(row)
    return rows


def run_sweep(scn: Scenario, jobs: int = 1) -> list[ReportRow]:
    """Run every (filter, r1, power) point of the scenario.

    Rows come back sorted by filter name, then ascending r1 and power,
    whatever ``jobs`` is. A failed point yields an error row and
    the rest of the sweep continues.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    groups = [(kind, r1) for kind in sorted(scn.filters, key=lambda k: k.value)
              for r1 in sorted(scn.sweep_r1)]
    scn = _sorted_powers(scn)
    if jobs == 1 or len(groups) == 1:
        parts = [_run_group(scn, kind, r1) for kind, r1 in groups]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(groups))) as pool:
            parts = list(pool.map(_run_group, [scn] * len(groups),
                                  [g[0] for g in groups], [g[1] for g in groups]))
    return [row for part in parts for row in part]


def _sorted_powers(scn: Scenario) -> Scenario:
    return replace(scn, sweep_power=tuple(sorted(scn.sweep_power)))


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6g}"


def format_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        nums = (r.r1_ohm, r.p_target_w, r.p_in_w, r.p_out_w, r.efficiency, r.thd_pct,
                r.i1_rms_a, r.mod_index)
        lines.append(",".join([r.filter_kind.value, *map(_fmt, nums),
                               "true" if r.compliant else "false"]))
    return "\n".join(lines) + "\n"


def write_csv(rows, destination) -> None:
    """Write the sweep report; ``destination`` is a path."""
    path = Path(destination)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(rows))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_csv(source) -> list[ReportRow]:
    """Parse a report written by :func:`write_csv`."""
    path = Path(source)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for rec in reader:
            kind = FilterKind.parse(rec[0])
            nums = [float(x) for x in rec[1:9]]
            error = "failed" if any(math.isnan(x) for x in nums[2:]) else None
            rows.append(ReportRow(kind, *nums, compliant=rec[9] == "true", error=error))
    return rows
