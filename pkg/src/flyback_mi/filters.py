"""CL and LCL output filters between the converter current and a stiff grid.

State layout (plain numpy arrays):

* CL: ``[v_c, i_l]``
* LCL: ``[v_a, i_li, v_cf, i_lg]`` where ``v_a`` is the voltage on the small
  converter-interface capacitor ``c_s``

The flyback secondary is a pulsating current source, and a current source in
series with ``l_i`` has no path while the diode blocks. ``c_s`` gives the LCL a
converter-side voltage node, so the simulated LCL is strictly a C-LCL network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class FilterKind(str, Enum):
    CL = "CL"
    LCL = "LCL"

    @classmethod
    def parse(cls, text) -> "FilterKind":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().upper())
        except ValueError:
            raise ValueError(f"unknown filter kind {text!r}; expected CL or LCL") from None


@dataclass(frozen=True)
class FilterParams:
    """Component values; the unused group for the other kind is ignored."""

    kind: FilterKind = FilterKind.CL
    l: float = 5e-3
    c: float = 200e-9
    l_i: float = 4.5e-3
    l_g: float = 12e-3
    c_f: float = 100e-9
    c_s: float = 50e-9
    r_l_series: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind.parse(self.kind))
        names = ("l", "c") if self.kind is FilterKind.CL else ("l_i", "l_g", "c_f", "c_s")
        for name in names:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.r_l_series >= 0:
            raise ValueError("r_l_series must be >= 0")
        if self.kind is FilterKind.LCL and self.c_s > self.c_f / 2:
            raise ValueError("c_s must not exceed c_f/2")

    @property
    def n_states(self) -> int:
        return 2 if self.kind is FilterKind.CL else 4

    @property
    def grid_current_index(self) -> int:
        return self.n_states - 1


@dataclass(frozen=True)
class GridParams:
    v_g_amp: float = 325.0
    f0: float = 50.0

    def __post_init__(self):
        if not self.v_g_amp > 0:
            raise ValueError("v_g_amp must be > 0")
        if not self.f0 > 0:
            raise ValueError("f0 must be > 0")

    def voltage(self, t):
        return self.v_g_amp * np.sin(2.0 * math.pi * self.f0 * t)


def zero_state(fp: FilterParams) -> np.ndarray:
    return np.zeros(fp.n_states)


def filter_derivative(fs, i_inj: float, v_grid: float, fp: FilterParams) -> np.ndarray:
    """Time derivative of the filter state for injected current and grid voltage."""
    fs = np.asarray(fs, dtype=float)
    if fs.shape != (fp.n_states,):
        raise ValueError(f"{fp.kind.value} filter expects {fp.n_states} states, got {fs.shape}")
    r = fp.r_l_series
    if fp.kind is FilterKind.CL:
        v_c, i_l = fs
        return np.array([(i_inj - i_l) / fp.c, (v_c - v_grid - r * i_l) / fp.l])
    v_a, i_li, v_cf, i_lg = fs
    return np.array([
        (i_inj - i_li) / fp.c_s,
        (v_a - v_cf - r * i_li) / fp.l_i,
        (i_li - i_lg) / fp.c_f,
        (v_cf - v_grid - r * i_lg) / fp.l_g,
    ])


def stored_energy(fs, fp: FilterParams) -> float:
    fs = np.asarray(fs, dtype=float)
    if fp.kind is FilterKind.CL:
        return 0.5 * (fp.c * fs[0] ** 2 + fp.l * fs[1] ** 2)
    return 0.5 * (fp.c_s * fs[0] ** 2 + fp.l_i * fs[1] ** 2
                  + fp.c_f * fs[2] ** 2 + fp.l_g * fs[3] ** 2)


def transfer_magnitude(fp: FilterParams, f: float) -> float:
    """Lossless grid-current / injected-current gain of the ideal filter.

    CL: ``1/|1 - w^2 l c|``. LCL with ``c_s -> 0``: the injected current flows
    entirely through ``l_i`` and divides between ``c_f`` and ``l_g`` (grid
    shorted), giving ``1/|1 - w^2 l_g c_f|``. Returns ``inf`` at the pole.
    """
    if not f > 0:
        raise ValueError("f must be > 0")
    w2 = (2.0 * math.pi * f) ** 2
    if fp.kind is FilterKind.CL:
        den = 1.0 - w2 * fp.l * fp.c
    else:
        den = 1.0 - w2 * fp.l_g * fp.c_f
    return math.inf if den == 0.0 else 1.0 / abs(den)


def network_transfer(fp: FilterParams, f) -> np.ndarray:
    """Complex grid-current / injected-current gain of the simulated network.

    Includes ``r_l_series`` and, for LCL, the interface capacitor ``c_s``.
    """
    s = 2j * math.pi * np.asarray(f, dtype=float)
    r = fp.r_l_series
    if fp.kind is FilterKind.CL:
        z_c = 1.0 / (s * fp.c)
        return z_c / (z_c + s * fp.l + r)
    z_cs = 1.0 / (s * fp.c_s)
    z_cf = 1.0 / (s * fp.c_f)
    z_lg = s * fp.l_g + r
    z_a = s * fp.l_i + r + z_cf * z_lg / (z_cf + z_lg)
    return z_cs / (z_cs + z_a) * z_cf / (z_cf + z_lg)


def resonance_frequency(fp: FilterParams) -> float:
    """Undamped resonance in Hz; LCL uses the voltage-fed form."""
    if fp.kind is FilterKind.CL:
        return 1.0 / (2.0 * math.pi * math.sqrt(fp.l * fp.c))
    return math.sqrt((fp.l_i + fp.l_g) / (fp.l_i * fp.l_g * fp.c_f)) / (2.0 * math.pi)


def natural_frequencies(fp: FilterParams) -> np.ndarray:
    """Lossless natural frequencies (Hz) of the simulated network, source open."""
    if fp.kind is FilterKind.CL:
        return np.array([resonance_frequency(fp)])
    a = np.array([
        [0.0, -1.0 / fp.c_s, 0.0, 0.0],
        [1.0 / fp.l_i, 0.0, -1.0 / fp.l_i, 0.0],
        [0.0, 1.0 / fp.c_f, 0.0, -1.0 / fp.c_f],
        [0.0, 0.0, 1.0 / fp.l_g, 0.0],
    ])
    w = np.abs(np.linalg.eigvals(a).imag)
    return np.unique(np.round(w[w > 0], 6)) / (2.0 * math.pi)
