"""Measured spin-star simulations: Liouvillian spectra, strong-measurement
reduction to an ancilla master equation, finite-N dynamics, mean-field limit
cycles and phase scans."""

__version__ = "0.1.0"

from .spin import (SpinStarParams, CollectiveSpinSet, collective_spin_operators,  # noqa: E402
                   central_spin_operators, spin_star_hamiltonian, partial_trace_central)
from .liouvillian import (SuperOperator, SpectralData, vectorize, devectorize,  # noqa: E402
                          build_superoperator, spin_star_liouvillian, eigendecompose,
                          classify_stripes, steady_state)
from .zeno import (DissipatorEigensystem, EffectiveModel, dissipator_eigensystem,  # noqa: E402
                   hamiltonian_components, effective_hamiltonian, kossakowski_and_lambshift,
                   effective_lindbladian, numerical_zeno_projection)
from .dynamics import Trajectory, evolve, polarized_dicke_state, oscillation_lifetime  # noqa: E402
from .meanfield import (MeanFieldState, ReducedParams, full_rhs, adiabatic_central_spin,  # noqa: E402
                        reduced_rhs, fixed_points, integrate_meanfield, limit_cycle_frequency)
from .phase import (PhasePoint, ScanConfig, critical_gamma, order_parameter,  # noqa: E402
                    scan_grid, stripe0_imaginary_pair)
