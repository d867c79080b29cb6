"""Numerical laboratory for nonholonomically constrained mechanics and
1+1-dimensional field dynamics: Chetaev reaction bases from constraint
functions, constrained integrators with multiplier recovery, and momentum
balance laws verified as numerical residuals along computed solutions."""

from .errors import (BlowUpError, ConfigError, InsufficientDataError,
                     MissingDataError, NhlabError, ParameterError,
                     SamplingError, SingularConstraintError, StructuralError)
from .jets import (COVARIANT, MECHANICS_SIG, NONCOVARIANT, ROD_SIG,
                   BaseSignature, ConstraintSpec, JetPoint, JetSystem,
                   LagrangianSpec, ProlongedVector, ReactionBasis,
                   SymmetrySection, chetaev_covariant, chetaev_noncovariant,
                   constraint_rank, contract_reaction, eval_constraints,
                   field_component, linear_combination, prolong,
                   section_contraction, time_translation)
from .mechanics import (MechState, MechSystem, Trajectory, benenti_system,
                        benenti_velocity_sections, benenti_weighted_section,
                        project, simulate, solve_multipliers, step)
from .momentum import (MomentumField, ResidualSeries,
                       momentum_equation_residual_mech,
                       momentum_equation_residual_rod,
                       momentum_equation_residuals_mech, momentum_mech,
                       rod_energy_current, rod_translation_momentum)
from .rod import (FieldHistory, RodGrid, RodParams, RodState,
                  circular_loop_state, energy_density,
                  field_equation_residuals,
                  perturbed_ring_state, reconstruct_velocities, rod_accel,
                  rod_constraint_spec, rod_energy, rod_pointwise_system,
                  rod_simulate, rod_step, rod_translation_section,
                  spatial_derivs, stable_step, straight_twisted_state,
                  translation_identity_residual)
from .symmetry import (AdmissibleBasis, SamplerConfig, SymmetryAnsatz,
                       contraction_matrix, find_admissible, principal_angles,
                       sample_constraint_manifold)

__version__ = "0.1.0"
