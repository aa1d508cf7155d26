"""Cavity-mediated spin-exchange dynamics of spin-1 atoms.

Modules
-------
params       physical constants and derived quantities
coupling     mode profiles, response functions, coupling graphs
meanfield    per-site spin-1 mean-field dynamics and slope analysis
spinmixing   three-mode pair creation: growth law and truncated-Wigner ensembles
exact        dense small-system references
scenarios    config-driven runs behind the ``spinexchange`` command
"""
__version__ = "0.1.0"

from .params import (PhysicalParams, cooperativity, optimal_detuning, quadratic_zeeman,
                     raman_detunings, two_pi, zeeman_splitting)
from .coupling import (CouplingGraph, ModeProfile, absorptive_response, build_coupling_graph,
                       dispersive_response, gaussian_mode_profile, tabulated_mode_profile)
from .meanfield import (EnsembleState, QuenchProtocol, bipartite_xy_protocol, evolve,
                        excitation_density, extract_couplings, hop_protocol, initialize,
                        spin1_matrices)
from .spinmixing import (ThreeModeParams, TrajectoryEnsemble, analytic_growth, fit_growth,
                         instability_condition, moments, semiclassical_evolve)
from .exact import (build_flipflop_hamiltonian, build_threemode_hamiltonian, evolve_exact,
                    evolve_lindblad, exact_pair_creation)
