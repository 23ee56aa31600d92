"""CP instruments on finite-dimensional block algebras, their dilations and measuring processes."""
from .algebra import (AlgebraElement, BlockAlgebra, NormalState, basis, commutant,
                      conditional_expectation, diagonal_algebra, element, embed, full_algebra,
                      identity, is_member, make_block_algebra, make_state, pure_state,
                      restrict_state, tensor)
from .dilation import (InstrumentDilation, MeasuringProcess, StinespringTriple,
                       canonical_extension, choi_matrix, choi_rank, dilate_instrument,
                       induced_instrument, kraus_from_choi, make_process, minimal_kraus,
                       minimal_stinespring, process_membership_residual, realize,
                       synthesize_measuring_process, verify_realization)
from .errors import *  # noqa: F401,F403
from .instrument import (INDEFINITE, CPInstrument, apply_dual, apply_predual,
                         computational_lueders, discrete_support, dual_map,
                         instrument_distance, instruments_equal, is_repeatable,
                         is_weakly_repeatable, joint_distribution, lueders_instrument,
                         make_instrument, outcome_probability, posterior_family,
                         trivial_instrument, validate)
from .localnet import (LocalNet, Region, causal_complement, complement_generators,
                       extend_local, intertwining_check, is_local_instrument, local_instrument,
                       make_lattice_net, parse_region, region_algebra, von_neumann_model)

__version__ = "0.1.0"
