"""Reachability of thermal states under dissipation plus free permutations."""

from .errors import (
    DegenerateGeneratorError,
    InvalidInputError,
    MajorisationViolation,
    NumericalFailure,
    RegimeError,
    SimplexReachError,
    SizeError,
    SolverError,
)
from .generator import (
    EnergySpec,
    GeneratorMatrix,
    LindbladPair,
    build_B0,
    build_lindblad_pair,
    build_tensor_B0,
    gibbs_vector,
    semigroup_step,
    thermal_angles,
    thermal_generator,
    zero_temperature_generator,
)
from .majorisation import (
    MajorisationPolytope,
    build_polytope,
    classical_majorises,
    d_majorises,
    dominating_vertex,
    witness_matrix,
)
from .quantum_lift import SuperOperator, gksl_matrix, lift_semigroup
from .reachability import (
    ControlSequence,
    Report,
    Trajectory,
    check_thm1_coverage,
    check_thm4,
    check_thm5_6,
    simulate,
)

__version__ = "0.1.0"
