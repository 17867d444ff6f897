"""Exact simulation of heralded linear-optics gates and a qudit Bell-state analyzer."""

from qudit_bell.analyzer import AnalyzerConfig, AnalyzerReport, analyze_all, build_analyzer, run_exact, run_sampled
from qudit_bell.branching import Branch, BudgetExceeded, ConditionalResult, chain
from qudit_bell.fock import (
    MeasurementBranch,
    ModeUnitary,
    SparseState,
    apply_interferometer,
    apply_phase,
    apply_two_mode,
    enumerate_sector,
    fock_dim,
    inner_product,
    measure_modes,
    permute_modes,
    tensor,
    transition_amplitude,
)
from qudit_bell.interferometer import beam_splitter, dft_matrix, phase_shifter, reck_decompose, recompose
from qudit_bell.klm import ancilla_phi, apply_ns, csign_basic, csign_teleported, ns_unitary
from qudit_bell.qudit import (
    Backend,
    QuditRegister,
    SwapNetwork,
    apply_cshift,
    bell_state,
    cshift_network,
    cswap,
    generalized_bell,
    hadamard_d,
    logical_state,
    search_minimal_network,
)

__version__ = "0.1.0"
