"""Self-stabilizing 2-edge / 2-vertex connectivity: simulator and verifier.

The package simulates a per-processor protocol over shared read/write-atomic
registers that, from any initial state, converges to a depth-first search
labeling from which every bridge, articulation point, and bridge-connected
component of the network can be read off.  Centralized brute-force oracles
certify every result.
"""

from .analysis import (
    CertificationReport,
    DetectionResult,
    NotStabilizedError,
    alpha_independence,
    certify,
    extract,
)
from .graph import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    GenerationError,
    Graph,
    GraphError,
    GraphParseError,
    NodeRangeError,
    PortAssignmentError,
    SelfLoopError,
    figure1,
    generate_clustered,
    generate_random_connected,
    parse_graph,
    render_graph,
    shuffle_ports,
)
from .oracle import (
    GroundTruth,
    brute_articulation_points,
    brute_bcc_partition,
    brute_bridges,
    bypass_count,
    first_dfs_paths,
    ground_truth,
    incoming_split,
    is_connected,
)
from .protocol import (
    BOTTOM,
    LinkClass,
    Path,
    ProcessorState,
    Register,
    ROOT_PATH,
    classify_link,
    concat_truncate,
    execute_step,
    format_path,
    lex_compare,
    node_program,
    nonroot_program,
    register_bit_budget,
    register_bits,
    root_program,
)
from .simulator import (
    Configuration,
    FaultSpec,
    FaultEvent,
    FaultTargetError,
    POST_STABILIZATION,
    RoundRobin,
    RunReport,
    Trace,
    UniformRandom,
    WeightedRandom,
    default_max_rounds,
    init_arbitrary,
    inject_fault,
    is_legitimate,
    make_scheduler,
    round_boundaries,
    run,
    step,
)

__version__ = "0.1.0"
