"""Frequency-domain coherence analysis of heterogeneous dynamical networks."""

from .errors import (
    CoherelabError,
    GridRefinementWarning,
    IllConditionedWarning,
    NumericalError,
    ValidationError,
)
from .rational import (
    AT_INFINITY,
    DegenerateMean,
    ExcessiveDegree,
    IndeterminateAt,
    Polynomial,
    Properness,
    RationalTF,
    ZeroFunctionInverse,
    harmonic_mean,
    is_at_infinity,
    poles,
    poly_eval,
    properness,
    simplify,
    tf_add,
    tf_approx_equal,
    tf_eval,
    tf_from_text,
    tf_inv,
    tf_mul,
    tf_scale,
    tf_to_text,
    zeros,
)
from .network import (
    GroundedLaplacian,
    LaplacianMatrix,
    algebraic_connectivity,
    complete_graph,
    grounded,
    grounded_bound_check,
    k_regular_ring,
    laplacian_from_edges,
    read_edge_list,
    scale_connectivity,
    write_edge_list,
)
from .coherence import (
    CoherenceReport,
    FrequencyGrid,
    NetworkModel,
    SweepResult,
    UniformityVerdict,
    coherent_pole_direction,
    coherent_projection,
    convergence_study,
    default_bounds,
    effective_connectivity,
    evaluate_point,
    failure_experiment,
    gbar_value,
    incoherence,
    lemma4_bound,
    nodal_multiplicity,
    normalized_incoherence,
    rhp_uniform_check,
    sup_incoherence,
    sweep,
    transfer_matrix,
    transfer_matrix_direct,
    transfer_matrix_modal,
)
from .timedomain import (
    AlgebraicLoop,
    ImproperTF,
    ImpulseAll,
    SinusoidAll,
    StateSpace,
    StepNode,
    StepTooLarge,
    Trajectory,
    closed_loop,
    coherent_reference,
    default_step,
    realize,
    simulate,
    trajectory_csv_lines,
    write_trajectory_csv,
)
from .aggregate import (
    AggregateModel,
    DroopPresent,
    MissingDroop,
    SwingParams,
    aggregate_dynamics,
    aggregate_from_text,
    aggregate_to_text,
    aggregation_error,
    swing_aggregate,
    swing_turbine_aggregate,
)
from .concentration import (
    CompleteFamily,
    ConcentrationRow,
    ConcentrationTable,
    Constant,
    ExpectedDynamics,
    MonteCarlo,
    NoClosedForm,
    RandomTFModel,
    RingFamily,
    Uniform,
    concentration_experiment,
    expected_dynamics,
    sample_nodes,
    write_concentration_csv,
)
from .netfile import (
    model_file_text,
    network_file_text,
    parse_model_text,
    parse_network_text,
    read_model_file,
    read_network_file,
    write_network_file,
)

__version__ = "0.1.0"
