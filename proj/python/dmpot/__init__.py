"""Python bindings for the dmpot peaks-over-threshold library."""

from ._core import (
    ConfigError,
    DataError,
    NumericalError,
    __version__,
    chi_coefficient,
    decluster,
    exponent_measure,
    independent_joint_return_period,
    joint_return_period,
    lrt_regional_shape,
    return_level,
    run_cli,
    solve_last_center,
    write_lookalike_panel,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "__version__",
    "chi_coefficient",
    "decluster",
    "exponent_measure",
    "independent_joint_return_period",
    "joint_return_period",
    "lrt_regional_shape",
    "return_level",
    "run_cli",
    "solve_last_center",
    "write_lookalike_panel",
]
