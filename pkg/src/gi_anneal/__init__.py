"""Graph isomorphism as penalty-QUBO ground-state search on a Chimera annealer model.

The pipeline: build a QUBO whose zero-energy states are isomorphisms, convert
it to an Ising model, minor-embed it in a fault-masked Chimera graph, sample
with simulated annealing as a stand-in for the device, and decode chains back
to vertex mappings.
"""

from .chimera import (
    Embedding,
    EmbeddedIsing,
    HardwareGraph,
    apply_gauge,
    chimera,
    default_hardware,
    embed_ising,
    find_embedding,
    validate_embedding,
)
from .decode import (
    Classification,
    DecodeStrategy,
    SolveConfig,
    SolveVerdict,
    logical_energies,
    p_zero,
    pooled_p_zero,
    repetitions,
    solve_gi,
    unembed,
)
from .graphs import Graph, gen_er, gen_iso_pair, gen_noniso_pair, is_isomorphic, parse_graph, write_graph
from .hamiltonian import (
    IsingProblem,
    QuboProblem,
    build_qubo_h1,
    build_qubo_h2,
    ising_energy,
    prepare_for_embedding,
    qubo_energy,
    qubo_to_ising,
)
from .samplers import JobParams, SampleSet, brute_force, run_job, simulated_anneal

__version__ = "0.1.0"
