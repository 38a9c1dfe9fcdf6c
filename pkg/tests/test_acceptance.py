"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records a one-line verdict that is printed at the end of the
session (see conftest.py) and also printed inline when run with ``-s``.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE
from flyback_mi.analysis import TimeSeries, harmonic_amplitudes, rms, thd
from flyback_mi.config import Scenario
from flyback_mi.converter import FlybackParams, ModulatorConfig
from flyback_mi.filters import FilterParams, resonance_frequency, transfer_magnitude
from flyback_mi.simulator import (SimConfig, calibrate_modulation_index, efficiency,
                                  filter_response, grid_current_thd, run, single_pulse)
from flyback_mi.sweep import compliance_check, run_sweep

RUNTIME_LIMIT_S = 300.0


def verdict(n, ok, msg):
    ACCEPTANCE[n] = (bool(ok), msg)
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {msg}")
    assert ok, msg


@pytest.fixture(scope="session")
def sweep():
    scn = Scenario()
    jobs = min(4, os.cpu_count() or 1)
    t = time.perf_counter()
    rows = run_sweep(scn, jobs=jobs)
    return rows, time.perf_counter() - t, jobs


def paired(rows):
    by = {r.key: r for r in rows}
    return [(by[("CL", r1, p)], by[("LCL", r1, p)])
            for (k, r1, p) in sorted(by) if k == "CL" and ("LCL", r1, p) in by]


def test_1_compliance(sweep):
    rows, elapsed, jobs = sweep
    bad = [r.key for r in rows if not (r.ok and r.thd_pct < 5.0)]
    worst = max((r.thd_pct for r in rows if r.ok), default=math.nan)
    consistent = all(r.compliant == compliance_check(r.thd_pct) for r in rows)
    ok = len(rows) == 30 and not bad and consistent and elapsed < RUNTIME_LIMIT_S
    verdict(1, ok, f"{len(rows)} rows, worst THD {worst:.3f} %, non-compliant {bad}, "
                   f"sweep {elapsed:.0f} s with {jobs} worker(s) (limit {RUNTIME_LIMIT_S:.0f} s)")


def test_2_filter_ordering(sweep):
    rows, _, _ = sweep
    gaps = [(cl.r1_ohm, cl.p_target_w, cl.thd_pct - lcl.thd_pct) for cl, lcl in paired(rows)]
    bad = [(r1, p, round(g, 3)) for r1, p, g in gaps if not 0.1 < g < 2.0]
    ok = len(gaps) == 15 and not bad
    verdict(2, ok, f"THD(CL) - THD(LCL) must lie in (0.1, 2.0) points; "
                   f"{len(bad)} of {len(gaps)} pairs outside: {bad}")


def test_3_resistance_trend(sweep):
    rows, _, _ = sweep
    msgs, ok = [], True
    for kind in ("CL", "LCL"):
        eff = [next(r.efficiency for r in rows if r.key == (kind, r1, 100.0))
               for r1 in (0.24, 0.12, 0.06)]
        inc = eff[0] < eff[1] < eff[2]
        spread = eff[2] - eff[0]
        inside = all(0.85 <= e <= 0.995 for e in eff)
        ok &= inc and spread >= 0.02 and inside
        msgs.append(f"{kind} " + "/".join(f"{e:.4f}" for e in eff) + f" spread {spread:.4f}")
    verdict(3, ok, "efficiency at 100 W for r1 0.24/0.12/0.06: " + "; ".join(msgs))


def test_4_resonance_constants():
    f_cl = resonance_frequency(FilterParams(kind="CL"))
    f_lcl = resonance_frequency(FilterParams(kind="LCL"))
    ok = abs(f_cl - 5032.9) <= 0.1 and abs(f_lcl - 8797.6) <= 0.1
    verdict(4, ok, f"CL {f_cl:.2f} Hz (5032.9), LCL {f_lcl:.2f} Hz (8797.6)")


def _simulated_gain(fp, f, dt, t_settle, t_capture):
    ts, _ = filter_response(fp, dt, t_settle, t_capture, inj_amp=1.0, inj_f=f)
    return harmonic_amplitudes(ts, f, 1).amplitudes[1]


def test_5_oracles():
    errs = []
    t_on = 0.37 / 25e3
    for r1, r_on in ((0.0, 0.0), (0.24, 0.06)):
        fly = FlybackParams(r1=r1, r_on=r_on)
        r = fly.r_charge
        want = fly.v_dc * t_on / fly.l_m if r == 0 else \
            fly.v_dc / r * (1 - math.exp(-r * t_on / fly.l_m))
        got = single_pulse(fly, t_on, 2e-7).peak_current
        errs.append(("pulse R=%g" % r, abs(got / want - 1), 1e-3))
    # r = 1 ohm damps the start-up transient (2L/r <= 9 ms) while moving the
    # gain by < 0.2 % at both test frequencies; the LCL uses a 10 pF interface
    # capacitor, the current-fed limit the closed form assumes
    cl = FilterParams(kind="CL", r_l_series=1.0)
    lcl = FilterParams(kind="LCL", c_s=10e-12, r_l_series=1.0)
    for fp, dt in ((cl, 2e-7), (lcl, 2e-8)):
        for f in (1e3, 25e3):
            got = _simulated_gain(fp, f, dt, 0.1, 0.02)
            want = transfer_magnitude(fp, f)
            errs.append((f"{fp.kind.value} {f / 1e3:g} kHz", abs(got / want - 1), 1e-2))
    ok = all(e < tol for _, e, tol in errs)
    verdict(5, ok, ", ".join(f"{n} err {e:.2e}" for n, e, _ in errs))


def test_6_conservation(sweep):
    rows, _, _ = sweep
    worst = max(abs(r.audit_residual_w) / r.p_in_w for r in rows)
    fly = FlybackParams(r1=0.0, r2=0.0, r_on=0.0, v_d=0.0)
    eff = []
    for kind in ("CL", "LCL"):
        cfg = SimConfig(flyback=fly, modulator=ModulatorConfig(m=0.35),
                        filter=FilterParams(kind=kind, r_l_series=0.0))
        eff.append(efficiency(run(cfg)))
    ok = worst <= 1e-3 and all(abs(e - 1) <= 0.002 for e in eff)
    verdict(6, ok, f"max |residual|/p_in over sweep {worst:.2e} (<= 1e-3); lossless "
                   f"efficiency CL {eff[0]:.6f}, LCL {eff[1]:.6f}")


def test_7_numerics():
    scn = Scenario()
    parts, ok = [], True
    for kind in ("CL", "LCL"):
        cfg = scn.config_for(kind)
        cfg = cfg.with_m(calibrate_modulation_index(cfg, 100.0))
        a, b = run(cfg), run(replace(cfg, dt=cfg.dt / 2))
        de = abs(efficiency(b) / efficiency(a) - 1)
        dthd = abs(grid_current_thd(b) / grid_current_thd(a) - 1)
        dp = abs(b.p_out / a.p_out - 1)
        again = run(cfg)
        same = (again.grid_current == a.grid_current and again.i_m_trace == a.i_m_trace
                and again.dc_current == a.dc_current and again.p_out == a.p_out)
        ok &= de < 2e-3 and dthd < 2e-3 and same
        parts.append(f"{kind} d_eff {de:.1e}, d_thd {dthd:.1e}, d_pout {dp:.1e}, "
                     f"bit-identical {same}")
    verdict(7, ok, "; ".join(parts))


def test_8_signal_analysis():
    fs, f0 = 2e5, 50.0
    t = np.arange(4000) / fs
    parts = [(1, 1.0, 0.2), (3, 0.3, -1.1), (5, 0.05, 0.7), (13, 0.002, 2.9), (40, 0.01, 0.0)]
    x = sum(a * np.sin(2 * math.pi * h * f0 * t + ph) for h, a, ph in parts)
    ts = TimeSeries(x, 1 / fs)
    spec = harmonic_amplitudes(ts, f0, 40)
    rec = max(abs(spec.amplitudes[h] / a - 1) for h, a, _ in parts)
    parseval = abs(rms(ts) ** 2 / (spec.amplitudes[0] ** 2 + np.sum(spec.amplitudes[1:] ** 2) / 2) - 1)
    n = 400_000  # one period at 2e7 Hz, zero on the two edges
    sq = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    sq[0] = sq[n // 2] = 0.0
    sq_thd = thd(harmonic_amplitudes(TimeSeries(sq, 1 / 2e7), f0, 40), 40)
    ok = rec < 1e-9 and abs(sq_thd - 0.4703) < 1e-3 and parseval < 1e-6
    verdict(8, ok, f"max relative amplitude error {rec:.1e}, square-wave THD {sq_thd:.5f}, "
                   f"Parseval error {parseval:.1e}")
