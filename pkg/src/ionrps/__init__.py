"""Classical and quantum reflecting projective simulation on trapped ions."""
from .classical import (classical_rps_deliberate, spectral_gap, standard_ps_deliberate,
                        stationary_distribution, tailed_distribution)
from .ecm import (Clip, ClipKind, ClipNetwork, FlagSet, HValues, LearningParams, flag_update,
                  learn_update, time_reversed, validate_network)
from .noise import (ExperimentConfig, ExperimentStats, NoiseModel, TrialRecord, fit_scaling,
                    monte_carlo, perturb_sequence, run_trial, statistical_distance)
from .pulses import (Pulse, PulseKind, PulseSequence, compile_hadamard,
                     compile_rank_one_deliberation, compile_Y, controlization_protocol_2ion,
                     measurement_distribution, pulse_count_formula, pulse_unitary)
from .quantum import (AngleTree, aro, build_walk_operator, coherent_ctrl, controlization_angles,
                      Deliberation, grover_deliberate, grover_deliberation, probability_unitary,
                      rank_one_deliberate, rank_one_deliberation, ref_actions,
                      stationary_state)

__version__ = "0.1.0"
