"""Deterministic teleportation of diagonal multi-qubit mixtures using classically
correlated pairs and classical communication, with a dense density-matrix
engine and an exact probability-vector fast path."""

from diagtele.gates import (
    Gate,
    PermutationGate,
    Unitary,
    alice_circuit,
    alice_operator,
    apply_gate_diagonal,
    apply_unitary,
    cnot,
    embed_single,
    interleave_network,
    swap,
)
from diagtele.measurement import (
    BranchRecord,
    branch_probabilities,
    enumerate_branches,
    sample_outcome,
)
from diagtele.protocol import (
    ClassicalMessage,
    PauliString,
    TeleportationResult,
    correction_for,
    dephasing_demo,
    initial_joint_state,
    run_once,
    teleport_with_eigenbasis,
    verify_all_branches,
)
from diagtele.qstate import (
    DensityMatrix,
    DiagonalState,
    RegisterLayout,
    classical_pair,
    density_from_diagonal,
    diagonal_part,
    fidelity,
    generalized_classical_state,
    make_diagonal,
    partial_trace,
    tensor,
)

__version__ = "0.1.0"
