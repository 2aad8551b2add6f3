"""Simulate interleaved DNS resolver request streams and deinterleave them.

Users browse pages according to a hidden semi-Markov model; a turn scheduler
decides which user fills each slot of the resolver queue. Two decoders recover
the user behind every request: exact Viterbi on the augmented product HMM and
a recurrent sequence labeler (simple RNN or LSTM) trained from scratch.
"""
from deinterleave.core import (
    MalformedModelError,
    UserModel,
    UserState,
    init_state,
    make_rng,
    sample_index,
    simulate_user,
    user_step,
)
from deinterleave.interleaver import (
    LabeledSequence,
    TurnScheduler,
    interleave,
    next_user,
    split_by_user,
)
from deinterleave.ahmm import (
    AugmentedHMM,
    ImpossibleSequenceError,
    StateSpaceTooLarge,
    build_ahmm,
    forward_loglik,
    viterbi,
)
from deinterleave.synthgen import (
    CaseSpec,
    ScenarioParams,
    discretized_beta_row,
    gen_case,
    gen_output_row,
    gen_toy,
    gen_turn_matrix,
)
from deinterleave.metrics import ConstantPredictor, accuracy, baseline_majority

__version__ = "0.1.0"
