"""Entropic quantities, almost-iid states and finite-n Stein-exponent checks."""
from .almostiid import (AlmostIIDEnsemble, almost_iid_basis, dmax_pinched_vs_iid,
                        pinch_to_blocks, random_almost_iid, random_ensemble, rotation_unitary,
                        sym_subspace_projector, symmetrize, type_state)
from .divergences import (dmax, dmin, entropy, fidelity, purified_distance, rel_entropy,
                          renyi_sandwiched)
from .hyptest import beta_eps, buscemi_sandwich_check, dh, dh_classical_iid, dh_sdp, smooth_dmax
from .lab import (ExperimentConfig, ScheduleReport, emit_csv, gsl_converse_check,
                  robust_stein_table, schedule_eval, stein_table, superadditivity_check)
from .resource import (PPTSet, REEResult, SingleIID, continuity_bound, continuity_check,
                       is_member, ree_frank_wolfe)
from .stateio import read_state, write_state
from .tensor import SiteStructure, partial_trace, partial_transpose, tensor
from .wasserstein import w1_bracket, w1_distance

__version__ = "0.1.0"
