"""Desk-scale simulator of measurement-induced decoherence: a lattice
Schwinger model read out by a heavy apparatus particle that is itself
monitored by a light environment particle, with entropy, Bures-distance and
site-local decoherence diagnostics."""

from .tensor import (
    CompositeSpace,
    HilbertFactor,
    OperatorExpr,
    StateVector,
    compose_space,
    inner,
    kron_states,
)
from .schwinger import (
    MeasuredRegion,
    SchwingerParams,
    build_schwinger,
    charge_pair_state,
    ground_state,
    measured_operator,
)
from .probe import (
    Boundary,
    CouplingParams,
    ParticleParams,
    build_full_hamiltonian,
    build_h_ae,
    build_h_sa,
    gaussian_packet,
    tripartite_space,
    uniform_state,
)
from .evolve import (
    DenseEvolver,
    EvolutionParams,
    TrajectoryRecord,
    evolve_step,
    evolve_trajectory,
    exact_evolve,
)
from .qinfo import (
    DensityMatrix,
    bures_distance,
    fidelity,
    haar_random_state,
    partial_trace,
    random_density_matrix,
    von_neumann_entropy,
)

__version__ = "0.1.0"
