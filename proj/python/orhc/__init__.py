from ._orhc import (
    ConfigError,
    GeometryError,
    Scenario,
    analytic_neumann_spectrum,
    fit_log_linear,
    normalize_config,
    preset_text,
)

__all__ = [
    "ConfigError",
    "GeometryError",
    "Scenario",
    "analytic_neumann_spectrum",
    "fit_log_linear",
    "normalize_config",
    "preset_text",
]
