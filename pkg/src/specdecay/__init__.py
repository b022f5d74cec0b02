"""specdecay: spectral classification and desk-scale certification of
algebraic energy decay for divergence-free flows.

The package classifies divergence-free initial data by the decay rate
of their heat/Stokes flow (dyadic two-sided characterization), evolves
them under the exact semigroup and a 2D pseudo-spectral Navier-Stokes
integrator, and certifies the decay-transfer estimates numerically.
"""
from .certify import (Conventions, DecayCertificate, EquivalenceReport,
                      EquivalenceRow, equivalence_report, fit_rate,
                      inverse_wiegner_check, mass_ladder)
from .dyadic import (DEFAULT_WINDOW, BesovReport, DyadicSpectrum,
                     MembershipVerdict, V_alpha_membership, besov_seminorm,
                     dyadic_blocks, equivalent_norm, script_A_membership,
                     spectrum_to_csv_rows)
from .errors import (BlowupDetected, CFLViolation, ConfigInvalid,
                     ExecutionError, HorizonExceeded, InfiniteEnergy,
                     MassUnresolvable, QuadratureDivergence, SpecDecayError,
                     WindowTooShort, WindowUnresolvable)
from .fields import (FieldNorms, Grid, GridField, RadialSpectralProfile,
                     leray_project, low_freq_mass, norms,
                     sample_profile_to_grid, sphere_area, total_energy)
from .heat import (DecayProfile, ForcingSpec, decay_profile,
                   forcing_bound_check, fourier_splitting_check, grid_horizon,
                   heat_energy_identity, heat_evolve, stokes_duhamel)
from .io import (load_grid_field, load_profile_descriptor, save_grid_field,
                 save_profile_descriptor, write_csv)
from .nse import (SimConfig, SimTrace, energy_audit, evolve_nse,
                  gradient_decay_check, liminf_check, single_mode_field,
                  wiegner_difference_check)
from .quadrature import QuadratureSpec
from .synthesis import (PerturbationReport, SynthesisRecipe, build_recipe,
                        make_band_limited, make_gaussian_swirl,
                        make_log_counterexample, make_power_law,
                        make_random_div_free, make_v_alpha_perturbation,
                        make_zero_profile, shell_constant)

__version__ = "0.1.0"
