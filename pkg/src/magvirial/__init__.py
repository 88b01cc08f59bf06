"""magvirial: desk-scale checks for magnetic Schrodinger flows with growing
potentials -- virial identity residuals, Morrey-Campanato smoothing
functionals, Hardy ratios, and the multiplier calculus behind them."""

__version__ = "0.1.0"

from .grid import ComplexField, Grid, ScalarField, VectorField, build_grid, integrate, shell_integral
from .multiplier import MultiplierFamily, singular_parts, verify_bounds
from .operators import (
    DiscreteHamiltonian,
    SobolevScale,
    assemble_hamiltonian,
    covariant_gradient,
    ground_state,
    sobolev_norm,
)
from .potentials import (
    ElectricSpec,
    GaugeSpec,
    MagneticSpec,
    PotentialSpec,
    apply_gauge_phase,
    check_assumptions,
    gauge_transform,
)
from .solver import Trajectory, dense_propagate_oracle, gaussian_packet, propagate
from .estimates import (
    hardy_check,
    smoothing_ratio,
    smoothing_report,
    virial_residual,
    virial_series,
    virial_terms,
)

__all__ = [
    "__version__",
    "Grid",
    "ScalarField",
    "VectorField",
    "ComplexField",
    "build_grid",
    "integrate",
    "shell_integral",
    "MultiplierFamily",
    "singular_parts",
    "verify_bounds",
    "DiscreteHamiltonian",
    "SobolevScale",
    "assemble_hamiltonian",
    "covariant_gradient",
    "ground_state",
    "sobolev_norm",
    "ElectricSpec",
    "MagneticSpec",
    "GaugeSpec",
    "PotentialSpec",
    "apply_gauge_phase",
    "check_assumptions",
    "gauge_transform",
    "Trajectory",
    "gaussian_packet",
    "propagate",
    "dense_propagate_oracle",
    "hardy_check",
    "virial_terms",
    "virial_residual",
    "virial_series",
    "smoothing_ratio",
    "smoothing_report",
]
