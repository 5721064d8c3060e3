"""tokgraft: byte-level BPE vocabulary surgery and density measurement."""

from .core import (BpeModel, MergeGraph, MergeRule, build_merge_graph,
                   decode, decomposition, encode, encode_word,
                   is_self_reachable, pretokenize)
from .errors import (CapacityError, CompletenessError, ConfigError,
                     EmptyCorpusError, IntegrityError, ParseError,
                     SchemaError, TokgraftError)
from .metrics import (DensityReport, FreqTable, compare_density,
                      density_report, token_frequency)
from .model_io import (load_candidates, load_model, save_candidates,
                       save_model, stream_words)
from .surgery import (CandidateSet, PassStats, ProtectedSet, RemovalRanking,
                      TransplantResult, classify_protected,
                      extract_candidates, refine_reachability,
                      removable_closure, score_removal, transplant)

__version__ = "0.1.0"

__all__ = [
    "BpeModel", "MergeGraph", "MergeRule", "build_merge_graph",
    "decode", "decomposition", "encode", "encode_word",
    "is_self_reachable", "pretokenize",
    "CandidateSet", "PassStats", "ProtectedSet", "RemovalRanking",
    "TransplantResult", "classify_protected", "extract_candidates",
    "refine_reachability", "removable_closure", "score_removal", "transplant",
    "DensityReport", "FreqTable", "compare_density", "density_report",
    "token_frequency",
    "load_candidates", "load_model", "save_candidates", "save_model",
    "stream_words",
    "TokgraftError", "ConfigError", "ParseError", "SchemaError",
    "CompletenessError", "IntegrityError", "CapacityError", "EmptyCorpusError",
]
