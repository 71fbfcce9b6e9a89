"""Python bindings for the naxray library."""

from ._core import (
    DegenerateInputError,
    DomainError,
    IoError,
    NumericError,
    PotentialField,
    Structure,
    constant_weight_symbol,
    fmt,
    hellinger,
    l2_distance,
    linf_norm,
    log_likelihood,
    pseudolin_residual,
    random_field,
    read_field,
    scattering_data,
    scattering_value,
    write_field,
    xray,
)

__all__ = [
    "DegenerateInputError",
    "DomainError",
    "IoError",
    "NumericError",
    "PotentialField",
    "Structure",
    "constant_weight_symbol",
    "fmt",
    "hellinger",
    "l2_distance",
    "linf_norm",
    "log_likelihood",
    "pseudolin_residual",
    "random_field",
    "read_field",
    "scattering_data",
    "scattering_value",
    "write_field",
    "xray",
]
