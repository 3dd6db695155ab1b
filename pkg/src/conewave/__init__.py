"""Wave dispersion on asymptotically conic manifolds.

Geometry, geodesic flow, distance functions, spectral wave propagation,
and the dispersive-estimate experiments built on top of them.
"""

from .errors import (
    BandResolutionError,
    ConfigError,
    CoordinateSingularityError,
    NumericalError,
)
from .geometry import (
    ManifoldSpec,
    RadialWeight,
    SPEC_PRESETS,
    cone_spec,
    flat_spec,
    neck_spec,
    perturbed_spec,
    smoothstep5,
)
from .geodesics import (
    GeodesicResult,
    PhasePoint,
    TrappingReport,
    classify_trapping,
    integrate_geodesic,
)
from .distances import (
    PointPair,
    bvp_distance,
    check_ang_lower_bound,
    conic_distance,
    distance_error_decay,
    distance_hessian,
    flat_bilaplacian_pairing,
)
from .flatspace import (
    CounterexampleField,
    ExponentReport,
    FluxQuadrature,
    GaussianWavePacket,
    colocated_control_integral,
    counterexample_scaling,
    flat_sobolev_norm,
    gaussian_gradient,
    gaussian_solution,
    mixed_gradient_integral,
    sobolev_scaling_fit,
)
from .spectral import (
    DiscreteHamiltonian,
    HamiltonianFamily,
    WaveField,
    band_packet,
    build_hamiltonian,
    evolve,
    littlewood_paley,
    lp_window,
    mass_near_wall,
    sobolev_norm,
    spacetime_l4,
    trajectory,
)
from .functionals import (
    AngularSymbol,
    CommutatorResiduals,
    EstimateReport,
    MorawetzReport,
    angular_morawetz,
    commutator_identities,
    default_symbol_family,
    half_angular,
    heisenberg_residual,
    interaction_morawetz_flat,
    local_smoothing,
    no_derivative_smoothing,
    smooth_radial_scale,
    strichartz_ratio,
)

__all__ = [
    "BandResolutionError",
    "ConfigError",
    "CoordinateSingularityError",
    "NumericalError",
    "ManifoldSpec",
    "RadialWeight",
    "SPEC_PRESETS",
    "cone_spec",
    "flat_spec",
    "neck_spec",
    "perturbed_spec",
    "smoothstep5",
    "GeodesicResult",
    "PhasePoint",
    "TrappingReport",
    "classify_trapping",
    "integrate_geodesic",
    "PointPair",
    "bvp_distance",
    "check_ang_lower_bound",
    "conic_distance",
    "distance_error_decay",
    "distance_hessian",
    "flat_bilaplacian_pairing",
    "CounterexampleField",
    "ExponentReport",
    "FluxQuadrature",
    "GaussianWavePacket",
    "colocated_control_integral",
    "counterexample_scaling",
    "flat_sobolev_norm",
    "gaussian_gradient",
    "gaussian_solution",
    "mixed_gradient_integral",
    "sobolev_scaling_fit",
    "DiscreteHamiltonian",
    "HamiltonianFamily",
    "WaveField",
    "band_packet",
    "build_hamiltonian",
    "evolve",
    "littlewood_paley",
    "lp_window",
    "mass_near_wall",
    "sobolev_norm",
    "spacetime_l4",
    "trajectory",
    "AngularSymbol",
    "CommutatorResiduals",
    "EstimateReport",
    "MorawetzReport",
    "angular_morawetz",
    "commutator_identities",
    "default_symbol_family",
    "half_angular",
    "heisenberg_residual",
    "interaction_morawetz_flat",
    "local_smoothing",
    "no_derivative_smoothing",
    "smooth_radial_scale",
    "strichartz_ratio",
]
