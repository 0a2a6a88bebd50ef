"""Frequency-dependent reflection models and configuration strategies for
beyond-diagonal reconfigurable surfaces, plus a multi-band MIMO Monte Carlo
harness."""

from .channel import (AVAILABLE, BLOCKED, ChannelSet, NetworkScenario, PowerConfig,
                      effective_channels, path_gain, sample_channels, stream_rng,
                      zf_precoder)
from .circuit import (BranchImpedances, CapacitancePlan, CircuitParams, Codebook,
                      RisTopology, admittance_matrix, build_codebook,
                      impedance_from_scattering, inter_impedance, random_plan,
                      retrieve_branch_impedances, scattering_from_capacitances,
                      scattering_from_impedance, self_impedance)
from .matrixkit import (duplication_matrix, kron, leading_right_singular_vector,
                        unvec, unvech, vec, vech, vech_indices)
from .metrics import (AggregateResult, ResultRow, SweepSpec, TrialResult, aggregate,
                      evaluate_received_powers, frequency_sweep, network_sum_power,
                      received_power, run_monte_carlo, sum_power_per_bs,
                      sum_spectral_efficiency_outdated)
from .optimizer import (ConfiguredRis, FwConfig, GroupAssignment, GroupSolution,
                        ObjectiveWeights, RelaxedSolution, configure_fc, configure_gc,
                        frank_wolfe, project_to_codebook, relaxed_block_branches,
                        snap_to_codebook, solve_fc_blocked, solve_fc_direct,
                        solve_gc_blocked, solve_gc_direct, stack_fc, stack_gc)

__version__ = "0.1.0"
