"""Rateless LT coding with prior-guided unequal error protection and soft BP decoding."""
from .bp_decoder import (DecodeGraph, DecodeResult, OpCounter, decode, exact_marginals,
                         message_increase_diagnostic, predicted_complexity)
from .broadcast_sim import (GridPoint, ReceiverProfile, ScalingTable, SimulationRecord, SourceConfig,
                            StreamSet, allocate_rate, poll_stream, run_broadcast, scaling_map, sweep)
from .channel import ChannelParams, capacity, channel_tanh_mean, demodulate, modulate, transmit
from .config import RunConfig, load_config
from .errors import ConfigError, InfeasibleError, ParseError, StructuralError, UEPFountainError
from .lt_codec import CodedSymbolSpec, GeneratorStream, encode_stream, encode_symbol
from .source_model import BitBlock, PriorVector, generate_bimodal, generate_synthetic
from .uep_design import (DegreeDistribution, SelectionWeights, design_lambda, dkl_upper_bound,
                         exact_symbol_kl, pinsker_mi_bound, psi, psi_exact, reliability,
                         selection_weights, tune_lambda)

__version__ = "0.1.0"
