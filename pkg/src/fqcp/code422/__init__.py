"""[[4,2,2]] code algebra, gadgets, fault checking and mitigation transforms."""
from .faults import FaultOutcome, FTReport, enumerate_faults, ft_check, outcome_from_statevector, propagate_pauli
from .gadgets import Gadget, Instr, accepted_branch, build_gadget, compose
from .mitigation import (
    clifford_deform,
    count_double_z_logical,
    dfs_phase,
    dfs_relabel,
    dfs_transform,
    insert_dd,
)
from .pauli import LOGICALS, S_X, S_Z, PauliString, classify_pauli, syndrome
from .statevector import Fault, apply_gadget_statevector, encode_state

__all__ = [
    "FaultOutcome", "FTReport", "enumerate_faults", "ft_check", "outcome_from_statevector",
    "propagate_pauli", "Gadget", "Instr", "accepted_branch", "build_gadget", "compose",
    "clifford_deform", "count_double_z_logical", "dfs_phase", "dfs_relabel", "dfs_transform",
    "insert_dd", "LOGICALS", "S_X", "S_Z", "PauliString", "classify_pauli", "syndrome",
    "Fault", "apply_gadget_statevector", "encode_state",
]
