"""Two-switch flyback power stage with a line-frequency unfolder.

Both primary switches share one gate. While the gate is on the magnetizing
inductance charges from the source through the winding and the two switches;
when it turns off the stored current is released through the secondary diode
into the filter node, with its sign flipped by the unfolding bridge according
to grid polarity. The piecewise-linear three-mode model is::

    CHARGE     l_m di/dt = v_dc - (r1 + 2 r_on) i
    DISCHARGE  l_m di/dt = -n (p v_node + v_d) - n^2 r2 i
    IDLE       i = 0

with ``i`` the magnetizing current referred to the primary and ``n = Np/Ns``.
Clamp diodes and leakage recirculation are not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum


class Mode(IntEnum):
    CHARGE = 0
    DISCHARGE = 1
    IDLE = 2


@dataclass(frozen=True)
class FlybackParams:
    """Electrical parameters of the flyback stage (SI units)."""

    v_dc: float = 50.0
    l_m: float = 28e-6
    n: float = 0.15
    r1: float = 0.06
    r2: float = 0.05
    r_on: float = 0.06
    v_d: float = 0.7

    def __post_init__(self):
        if not self.v_dc > 0:
            raise ValueError("v_dc must be > 0")
        if not self.l_m > 0:
            raise ValueError("l_m must be > 0")
        if not self.n > 0:
            raise ValueError("n must be > 0")
        for name in ("r1", "r2", "r_on", "v_d"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def r_charge(self) -> float:
        """Series resistance of the charging loop: winding plus both switches."""
        return self.r1 + 2.0 * self.r_on


@dataclass(frozen=True)
class ModulatorConfig:
    """Open-loop sinusoidal PWM: duty ``min(m |sin(w0 t)|, d_max)``."""

    f_sw: float = 25e3
    f0: float = 50.0
    m: float = 0.0
    d_max: float = 0.95

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError("f0 must be > 0")
        if not self.f_sw > 2.0 * self.f0:
            raise ValueError("f_sw must exceed 2*f0")
        if not 0.0 <= self.d_max <= 0.95:
            raise ValueError("d_max must lie in [0, 0.95]")
        if not 0.0 <= self.m <= self.d_max:
            raise ValueError(f"m must lie in [0, d_max={self.d_max}], got {self.m}")


@dataclass(frozen=True)
class ConverterState:
    i_m: float = 0.0
    mode: Mode = Mode.IDLE

    def __post_init__(self):
        if not self.i_m >= 0:
            raise ValueError("magnetizing current cannot be negative")
        if self.mode == Mode.IDLE and self.i_m != 0.0:
            raise ValueError("IDLE requires zero magnetizing current")


def duty_reference(t: float, cfg: ModulatorConfig) -> float:
    return min(cfg.m * abs(math.sin(2.0 * math.pi * cfg.f0 * t)), cfg.d_max)


def gate_state(t: float, cfg: ModulatorConfig) -> bool:
    """Trailing-edge PWM: on while the sawtooth carrier is below the duty reference."""
    phase = (t * cfg.f_sw) % 1.0
    return phase < duty_reference(t, cfg)


def polarity(t: float, f0: float) -> int:
    """Grid polarity seen by the unfolder, +1 at an exact zero crossing."""
    return -1 if math.sin(2.0 * math.pi * f0 * t) < 0 else 1


def magnetizing_derivative(state: ConverterState, v_node: float, p: int,
                           params: FlybackParams) -> float:
    """di_m/dt in A/s for the current conduction mode."""
    i = state.i_m
    if state.mode == Mode.CHARGE:
        return (params.v_dc - params.r_charge * i) / params.l_m
    if state.mode == Mode.DISCHARGE:
        n = params.n
        return -(n * (p * v_node + params.v_d) + n * n * params.r2 * i) / params.l_m
    return 0.0


def injected_current(state: ConverterState, t: float, params: FlybackParams,
                     f0: float) -> float:
    """Unfolded secondary current delivered to the filter node."""
    if state.mode != Mode.DISCHARGE:
        return 0.0
    return params.n * state.i_m * polarity(t, f0)


def mode_transition(state: ConverterState, gate: bool) -> Mode:
    """Conduction mode implied by the gate and the magnetizing current.

    The DISCHARGE -> IDLE event at ``i_m = 0`` inside a step is located by the
    integrator; this function only covers decisions at step boundaries.
    """
    if gate:
        return Mode.CHARGE
    return Mode.DISCHARGE if state.i_m > 0 else Mode.IDLE
