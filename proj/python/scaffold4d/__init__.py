"""Python bindings for the scaffold4d C++ core."""

from ._core import (
    DegeneracyError,
    IoError,
    ValidationError,
    build_proxy,
    fit_scale_translation,
    orbit,
    read_depth_sequence,
    read_ply,
    read_pointmap,
    read_trajectory,
    render_depth,
    sha256_file,
    write_fixture,
)

__all__ = [
    "DegeneracyError",
    "IoError",
    "ValidationError",
    "build_proxy",
    "fit_scale_translation",
    "orbit",
    "read_depth_sequence",
    "read_ply",
    "read_pointmap",
    "read_trajectory",
    "render_depth",
    "sha256_file",
    "write_fixture",
]
