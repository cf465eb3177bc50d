"""npsl: a numerical laboratory for the Neumann-Poincare operator.

Nystrom discretization of layer potentials on closed curves and surfaces,
symmetrized NP eigendecomposition, principal-symbol Hamiltonian flow,
characteristic-variety functionals, eigenfunction localization and
quantum-ergodicity diagnostics, and quasi-static Helmholtz resonance
experiments.
"""

from .geometry import (ChartPoint, ChartSingularity, GeometryError,
                       GeometryJet, NodeSet, Surface, SurfaceSpec,
                       assumption_a_margin, best_chart, build_surface, circle,
                       ellipse2d, ellipsoid, node_set, smooth_star2d, sphere,
                       surface_of_revolution, surface_point)
from .assembly import (AssemblyError, DenseOperator, KernelKind, assemble,
                       evaluate_layer_potential, jump_check,
                       weighted_transpose)
from .spectrum import (EigenSystem, FractionalOperator, SpectralBand,
                       SpectralError, converged_count, export_eigenfunctions,
                       export_spectrum_csv, fractional_D_power,
                       hminus_half_weights, multiplicity_groups,
                       plasmonic_constant, symmetrized_eigensystem,
                       weyl_diagnostic)
from .symbol_flow import (CotangentPoint, FlowError, F_alpha, SymbolError,
                          Trajectory, VarietyDegeneracyError, VarietySample,
                          birkhoff_average, export_trajectory_csv,
                          export_variety_csv, hamiltonian,
                          hamiltonian_gradient, integrate_flow, kappa_tilde,
                          np_symbol, variety_sample, weighted_variety_volume)
from .localization import (BumpSpec, LocalizationError, LocalizationReport,
                           band_local_mass, bump_function,
                           export_localization_json, localization_ratio,
                           qe_variance, variety_weight)
from .helmholtz import (HelmholtzError, MediumParams, ResonanceResult,
                        drift_slope, export_drift_csv, export_field_csv,
                        find_resonance, lambda_of_media, plane_wave,
                        resonance_kernel_count, resonance_operator,
                        resonance_residual, scattered_field, static_mu1)

__version__ = "0.1.0"
