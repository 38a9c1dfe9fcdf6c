"""Transient simulation and harmonic analysis of a two-switch flyback microinverter."""

from .analysis import (AnalysisError, Spectrum, TimeSeries, average_power, full_spectrum,
                       harmonic_amplitudes, rms, thd)
from .config import Scenario, parse_config, serialize
from .converter import ConverterState, FlybackParams, Mode, ModulatorConfig
from .filters import FilterKind, FilterParams, GridParams, resonance_frequency, transfer_magnitude
from .simulator import (ConfigError, SimConfig, SimResult, SimulationError,
                        calibrate_modulation_index, efficiency, energy_audit,
                        grid_current_thd, run)
from .sweep import ReportRow, compliance_check, run_sweep, write_csv

__version__ = "0.1.0"
