"""Numerical laboratory for oscillatory and Schrodinger integral operators."""

__version__ = "0.1.0"

from .spectral import (Grid, GridFunction, NonFiniteError, forward_transform,  # noqa: E402
                       inverse_transform, lp_norm, frequency_multiplier)
from .decompositions import (build_lp_basis, lp_piece, second_decomposition,  # noqa: E402
                             directional_partition)
from .symbols import (PhaseFunction, Amplitude, critical_order, phase_preset,  # noqa: E402
                      amplitude_preset)
from .oio import OioSpec, apply_oio, apply_adjoint  # noqa: E402

__all__ = [
    "Grid", "GridFunction", "NonFiniteError", "forward_transform", "inverse_transform",
    "lp_norm", "frequency_multiplier", "build_lp_basis", "lp_piece",
    "second_decomposition", "directional_partition", "PhaseFunction", "Amplitude",
    "critical_order", "phase_preset", "amplitude_preset", "OioSpec", "apply_oio",
    "apply_adjoint",
]
