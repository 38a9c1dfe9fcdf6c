"""Time-domain simulation of flyback + output filter + stiff grid.

A run starts from the zero state, integrates ``t_settle`` seconds that are
thrown away and then captures ``t_capture`` seconds of waveforms. Input,
output and loss powers are averaged over the capture window only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as K
from .analysis import DEFAULT_H_MAX, TimeSeries, average_power, harmonic_amplitudes, thd
from .converter import FlybackParams, Mode, ModulatorConfig
from .filters import FilterKind, FilterParams, GridParams

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """Base class for failures while simulating."""


class InstabilityError(SimulationError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t = {t:.9g} s")
        self.t = t


class ConfigError(ValueError):
    pass


class CalibrationError(SimulationError):
    pass


class CalibrationRangeError(CalibrationError):
    pass


def _whole(x: float, what: str, tol: float = 1e-6) -> int:
    n = round(x)
    if abs(x - n) > tol * max(1.0, abs(x)):
        raise ConfigError(f"{what} must be an integer, got {x:.12g}")
    return int(n)


@dataclass(frozen=True)
class SimConfig:
    flyback: FlybackParams = field(default_factory=FlybackParams)
    modulator: ModulatorConfig = field(default_factory=ModulatorConfig)
    filter: FilterParams = field(default_factory=FilterParams)
    grid: GridParams = field(default_factory=GridParams)
    dt: float = 2e-7
    t_settle: float = 0.1
    t_capture: float = 0.1

    def __post_init__(self):
        f_sw, f0 = self.modulator.f_sw, self.grid.f0
        if not math.isclose(self.modulator.f0, f0, rel_tol=1e-12):
            raise ConfigError(f"modulator f0 {self.modulator.f0} differs from grid f0 {f0}")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.dt > 1.0 / (100.0 * f_sw) * (1 + 1e-12):
            raise ConfigError("dt must give at least 100 steps per switching period")
        _whole(1.0 / (f_sw * self.dt), "steps per switching period")
        if _whole(self.t_capture * f0, "capture window in fundamental periods") < 2:
            raise ConfigError("t_capture must span at least 2 fundamental periods")
        if self.t_settle * f0 < 2 - 1e-9:
            raise ConfigError("t_settle must span at least 2 fundamental periods")
        _whole(self.t_capture / self.dt, "t_capture/dt")
        _whole(self.t_settle / self.dt, "t_settle/dt")

    @property
    def steps_per_switching(self) -> int:
        return round(1.0 / (self.modulator.f_sw * self.dt))

    @property
    def n_settle(self) -> int:
        return round(self.t_settle / self.dt)

    @property
    def n_capture(self) -> int:
        return round(self.t_capture / self.dt)

    def with_m(self, m: float) -> "SimConfig":
        return replace(self, modulator=replace(self.modulator, m=m))

    def with_flyback(self, **changes) -> "SimConfig":
        return replace(self, flyback=replace(self.flyback, **changes))

    def packed(self) -> np.ndarray:
        mod = self.modulator
        return K.pack(self.flyback, mod.m, mod.d_max, self.filter,
                      self.grid.v_g_amp, self.grid.f0)


@dataclass(frozen=True, eq=False)
class SimResult:
    config: SimConfig
    grid_current: TimeSeries
    grid_voltage: TimeSeries
    dc_current: TimeSeries
    i_m_trace: TimeSeries
    p_in: float
    p_out: float
    p_loss_modeled: float
    losses: dict
    storage_change: float
    mode_fractions: dict


@dataclass(frozen=True)
class EnergyAudit:
    p_in: float
    p_out: float
    p_loss_modeled: float
    residual: float


@dataclass(frozen=True)
class SimState:
    """Full integrator state at step index ``k`` (time ``k*dt``).

    ``x`` follows the kernel layout: magnetizing current, four filter slots,
    then running energy integrals.
    """

    k: int
    x: np.ndarray
    mode: Mode = Mode.IDLE

    @classmethod
    def zero(cls) -> "SimState":
        return cls(0, np.zeros(K.NX))

    @property
    def i_m(self) -> float:
        return float(self.x[K.I_M])

    def filter_state(self, fp: FilterParams) -> np.ndarray:
        return self.x[1:1 + fp.n_states].copy()


def step(state: SimState, cfg: SimConfig) -> SimState:
    """Advance one integrator step from ``state.k*dt``.

    Raises :class:`InstabilityError` if the state turns non-finite.
    """
    if not np.all(np.isfinite(state.x)):
        raise InstabilityError(state.k * cfg.dt)
    x = np.array(state.x, dtype=float)
    k1, k2, k3, k4, xt, x0 = (np.zeros(K.NX) for _ in range(6))
    mode = K.step(x, state.k, cfg.steps_per_switching, cfg.dt, cfg.packed(),
                  k1, k2, k3, k4, xt, x0, np.zeros(3))
    if not np.all(np.isfinite(x[:5])):
        raise InstabilityError((state.k + 1) * cfg.dt)
    return SimState(state.k + 1, x, Mode(mode))


def _integrate(cfg: SimConfig, record: bool):
    x = np.zeros(K.NX)
    status, k_fail, traces, e_start, mode_time, sum_vi, _ = K.simulate(
        x, cfg.packed(), cfg.dt, cfg.steps_per_switching, 0,
        cfg.n_settle, cfg.n_capture, record)
    if status != K.OK:
        raise InstabilityError(k_fail * cfg.dt)
    return x, traces, e_start, mode_time, sum_vi


def _stored_energy(x: np.ndarray, cfg: SimConfig) -> float:
    fp = cfg.filter
    e = 0.5 * cfg.flyback.l_m * x[0] ** 2
    if fp.kind is FilterKind.CL:
        return e + 0.5 * (fp.c * x[1] ** 2 + fp.l * x[2] ** 2)
    return e + 0.5 * (fp.c_s * x[1] ** 2 + fp.l_i * x[2] ** 2
                      + fp.c_f * x[3] ** 2 + fp.l_g * x[4] ** 2)


def output_power(cfg: SimConfig) -> float:
    """Grid power of one run without keeping waveforms (used by calibration)."""
    _, _, _, _, sum_vi = _integrate(cfg, record=False)
    return sum_vi / cfg.n_capture


def run(cfg: SimConfig) -> SimResult:
    x, traces, e_start, mode_time, _ = _integrate(cfg, record=True)
    t_cap = cfg.t_capture
    t0 = cfg.n_settle * cfg.dt
    mk = lambda row: TimeSeries(traces[row], cfg.dt, t0)
    grid_current, grid_voltage, i_m, dc_current = mk(0), mk(1), mk(2), mk(3)
    de = (x - e_start) / t_cap
    losses = {
        "r1": de[K.E_R1],
        "switches": de[K.E_RON],
        "r2": de[K.E_R2],
        "diode": de[K.E_DIODE],
        "filter": de[K.E_FILTER],
    }
    total_time = mode_time.sum()
    return SimResult(
        config=cfg,
        grid_current=grid_current,
        grid_voltage=grid_voltage,
        dc_current=dc_current,
        i_m_trace=i_m,
        p_in=float(np.mean(cfg.flyback.v_dc * dc_current.samples)),
        p_out=average_power(grid_voltage, grid_current),
        p_loss_modeled=float(sum(losses.values())),
        losses={k: float(v) for k, v in losses.items()},
        storage_change=(_stored_energy(x, cfg) - _stored_energy(e_start, cfg)) / t_cap,
        mode_fractions={m.name: float(mode_time[m.value] / total_time) for m in Mode},
    )


def calibrate_modulation_index(cfg: SimConfig, target_p: float, rel_tol: float = 0.01,
                               max_iter: int = 40, cache: dict | None = None) -> float:
    """Bisect the modulation index until grid power is within ``rel_tol`` of target.

    Output power is assumed to rise with ``m``; every bisection point is
    checked against its bracket and a violation raises :class:`CalibrationError`.

    ``cache`` maps ``m`` to output power for this ``cfg``. Runs are
    deterministic, so calibrations to several targets on the same
    configuration can share one dict and skip repeated bisection points.
    """
    if not target_p > 0:
        raise CalibrationRangeError("target power must be > 0")
    cache = {} if cache is None else cache

    def power(m):
        if m not in cache:
            cache[m] = output_power(cfg.with_m(m))
        return cache[m]

    lo, hi = 0.0, cfg.modulator.d_max
    p_lo = power(lo)
    p_hi = power(hi)
    if target_p > p_hi:
        raise CalibrationRangeError(
            f"target {target_p:g} W exceeds the {p_hi:.4g} W reachable at m = d_max")
    mid = hi
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        p_mid = power(mid)
        log.debug("calibrate it=%d m=%.6f p=%.4f", it, mid, p_mid)
        if not p_lo <= p_mid <= p_hi:
            raise CalibrationError(
                f"output power not monotone in m: p({mid:.6g}) = {p_mid:.6g} W "
                f"outside [{p_lo:.6g}, {p_hi:.6g}]")
        if abs(p_mid - target_p) <= rel_tol * target_p:
            return mid
        if p_mid < target_p:
            lo, p_lo = mid, p_mid
        else:
            hi, p_hi = mid, p_mid
    return mid


def efficiency(res: SimResult) -> float:
    if not res.p_in > 0:
        raise ValueError("efficiency undefined for non-positive input power")
    return res.p_out / res.p_in


def energy_audit(res: SimResult) -> EnergyAudit:
    """Input power minus output power minus modelled dissipation."""
    return EnergyAudit(res.p_in, res.p_out, res.p_loss_modeled,
                       res.p_in - res.p_out - res.p_loss_modeled)


def grid_current_thd(res: SimResult, h_max: int = DEFAULT_H_MAX) -> float:
    spec = harmonic_amplitudes(res.grid_current, res.config.grid.f0, h_max)
    return thd(spec, h_max)


def filter_response(fp: FilterParams, dt: float, t_settle: float, t_capture: float,
                    inj_amp: float = 0.0, inj_f: float = 0.0, v_g_amp: float = 0.0,
                    f0: float = 50.0, x0=None) -> tuple[TimeSeries, np.ndarray]:
    """Drive the filter alone with a sinusoidal injection and/or grid voltage.

    The converter is held idle. Returns the captured grid current and the
    final filter state. ``fp`` may be any object with FilterParams attributes.
    """
    p = K.pack(FlybackParams(), 0.0, 0.0, fp, v_g_amp, f0, inj_amp, inj_f)
    x = np.zeros(K.NX)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        x[1:1 + x0.size] = x0
    n_settle = round(t_settle / dt)
    n_capture = round(t_capture / dt)
    status, k_fail, traces, *_ = K.simulate(x, p, dt, 1, 0, n_settle, n_capture, True)
    if status != K.OK:
        raise InstabilityError(k_fail * dt)
    n_states = 2 if int(p[K.P_KIND]) == K.CL else 4
    return TimeSeries(traces[0], dt, n_settle * dt), x[1:1 + n_states].copy()


@dataclass(frozen=True)
class PulseResult:
    peak_current: float
    t_end: float
    energy_in: float
    loss_charge: float
    stored_at_peak: float


def single_pulse(params: FlybackParams, t_on: float, dt: float,
                 fp: FilterParams | None = None, max_steps: int = 100_000) -> PulseResult:
    """One gate pulse into an idle converter with the grid at zero volts."""
    fp = fp or FilterParams()
    p = K.pack(params, 0.0, 0.0, fp, 0.0, 50.0)
    x = np.zeros(K.NX)
    peak, t_end, xp = K.single_pulse(x, p, t_on, dt, max_steps)
    return PulseResult(
        peak_current=float(peak),
        t_end=float(t_end),
        energy_in=float(xp[K.E_IN]),
        loss_charge=float(xp[K.E_R1] + xp[K.E_RON]),
        stored_at_peak=0.5 * params.l_m * float(peak) ** 2,
    )
