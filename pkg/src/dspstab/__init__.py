"""Stationary discrete shock profiles, Green's functions and nonlinear stability experiments."""
from .seqcore import (L1, LINF, CheckReport, NonSummableError, TailedSeq, WeightedNormSpec,
                      fit_decay_exponent, mass, read_seq_csv, shift, unshift, weighted_norm,
                      write_seq_csv)
from .scheme import (SchemeSpec, ShockPair, StateEscapeError, burgers_derivative, burgers_flux,
                     check_cfl, check_consistency, check_lax, check_rankine_hugoniot, evolve,
                     make_mlf, shock_pair)
from .profile import (ConvergenceError, FamilyRangeError, Profile, ProfileFamily,
                      family_lipschitz_check, identify_delta, localization_rates, mass_function,
                      solve_family, solve_sdsp)
from .linop import (BandedOp, SymbolData, analyze_symbol, apply, check_dissipativity,
                    check_hyp_inv, check_unit_roots, extract_diffusion, limit_symbol, linearize,
                    spectral_probe)
from .green import (KernelSpec, decomposition_residual, derivative_decay, e2mu, eigenvector_v,
                    green_column, h2mu, kernel_bound_check, semigroup_decay)
from .stability import (ConditionError, DecayParams, check_inq_bounds, decay_params,
                        duhamel_check, insum_bound_check, make_hJ, preset, q_identity_residual,
                        run_experiment)

__version__ = "0.1.0"
