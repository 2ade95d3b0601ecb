"""Spectra, dispersive shifts and parameter fits for a transmon whose
Josephson element is a single junction in series with a SQUID.

Energies are E/h in GHz, capacitances in fF, flux in units of Phi_0 unless a
:class:`FluxBias` (radians) is passed.
"""

from .circuit import (
    DeviceParams,
    FluxBias,
    energies_bo,
    energies_full,
    formula_discrepancies,
    island_charging_energy,
    lambda_and_sigma,
    load_params,
    reference_params,
    squid_params,
)
from .dispersive import chi_components, chi_sweep, find_chi_zero
from .errors import (
    ConfigError,
    DegenerateFitError,
    DispersiveBreakdownError,
    FitError,
    NonHermitianError,
    NumericError,
    ParameterError,
    RootNotFoundError,
)
from .estimator import (
    FitSpec,
    fit_device_parameters,
    fit_harmonic_content,
    model_discrepancy_report,
    potential_fourier,
    residuals,
    simulate_table,
)
from .models import HarmonicSpec, ModelKind, spectrum, sweep
from .specfit import (
    ExtractionConfig,
    TransitionTable,
    TwoToneScan,
    extract_transitions,
    fit_exponential_decay,
    fit_lorentzian,
    fit_ramsey,
    load_scan,
)

__version__ = "0.1.0"

__all__ = [
    "DeviceParams",
    "FluxBias",
    "energies_bo",
    "energies_full",
    "formula_discrepancies",
    "island_charging_energy",
    "lambda_and_sigma",
    "load_params",
    "reference_params",
    "squid_params",
    "chi_components",
    "chi_sweep",
    "find_chi_zero",
    "ConfigError",
    "DegenerateFitError",
    "DispersiveBreakdownError",
    "FitError",
    "NonHermitianError",
    "NumericError",
    "ParameterError",
    "RootNotFoundError",
    "FitSpec",
    "fit_device_parameters",
    "fit_harmonic_content",
    "model_discrepancy_report",
    "potential_fourier",
    "residuals",
    "simulate_table",
    "HarmonicSpec",
    "ModelKind",
    "spectrum",
    "sweep",
    "ExtractionConfig",
    "TransitionTable",
    "TwoToneScan",
    "extract_transitions",
    "fit_exponential_decay",
    "fit_lorentzian",
    "fit_ramsey",
    "load_scan",
    "__version__",
]
