"""Hybrid speech decoding toolkit.

Archive codecs, context splicing, a softmax acoustic model, local and remote
posterior backends, a lattice-generating beam-search decoder over a text
transducer, and WER scoring, tied together by the ``ramdec`` command.
"""

from .am import RemoteConfig, local_propagate, loglikes, parse_response, remote_propagate, serialize_request
from .ark import (
    AlignmentVector,
    FeatureMatrix,
    read_int_vector_ark,
    read_matrix_ark,
    write_int_vector_ark,
    write_matrix_ark,
)
from .dataset import (
    PriorVector,
    ShardPlan,
    SplicingConfig,
    TrainingExample,
    build_examples,
    compute_priors,
    read_priors,
    shard,
    splice,
    write_priors,
)
from .decoder import DecodeConfig, DecodeResult, Lattice, best_path, decode, prune_lattice, write_lattice_text
from .errors import (
    ArkError,
    DataError,
    DecodeError,
    FstError,
    ModelError,
    ProtocolError,
    RamdecError,
    RemoteError,
    ScoringError,
    TrainingError,
)
from .fst import Arc, DecodingGraph, SymbolTable, parse_fst_text, parse_symbol_table, validate_graph
from .mlp import MlpModel, TrainConfig, forward, init_model, load_model, save_model, train_sgd
from .score import ScoreReport, align_words, format_report, read_transcripts, score_corpus
from .toy import ToySpec, generate as generate_toy

__version__ = "0.1.0"
