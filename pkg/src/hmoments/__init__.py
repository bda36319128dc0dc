"""Hamiltonian moments: Pauli algebra, statevector sampling and moment-based energy estimators."""
from ._kernels import BACKEND
from .errors import (CalibrationError, CMXSingularityError, ConfigError, ContractError, CoverageError,
                     DegenerateSubspaceError, DimensionError, EstimatorDomainError, HMomentsError,
                     InsufficientMomentsError, ITENormalizationError, NumericalError,
                     PDSDegeneracyError, ResourceError)
from .pauli import PauliString, PauliSum, PauliTerm, basis_closure, pauli_mul
from .models import (HeisenbergParams, Topology, build_ansatz, build_heisenberg,
                     build_magnetization, exact_spectrum)
from .simulator import StateVector, prepare
from .moments import MomentTable, connected_moments, moments_exact, moments_from_expectations
from .grouping import greedy_qwc_grouping, shot_budget
from .estimators import (cmx_energy, infimum_estimate, ite_energy, krylov_generalized_eig,
                         lanczos_coefficients, optimize_tau, pds_energy)

__version__ = "0.1.0"
