"""Post-hoc adaptation of pretrained BPE merge lists to a target corpus."""

__version__ = "0.1.0"

from adaptbpe.adapt import AdaptConfig, AdaptationResult, Adapter, SwapRecord, adapt
from adaptbpe.baselines import first_k, first_k_positive, top_k
from adaptbpe.engine import (
    Encoder,
    TokenizedCorpus,
    detokenize,
    reference_tokenize,
    tokenize_corpus,
    tokenize_word,
)
from adaptbpe.freq_index import FrequencyIndex, build_index
from adaptbpe.merges import (
    ACTUAL,
    VIRTUAL,
    Kind,
    MergeRule,
    MergeTable,
    Symbol,
    build_merge_table,
    set_kind,
    validate_properness,
)
from adaptbpe.metrics import EvalReport, compression_utility, merge_depth, sweep
from adaptbpe.pretokenize import (
    PretokenizerSpec,
    WordHistogram,
    build_histogram,
    merge_histograms,
    pretokenize,
)

__all__ = [
    "ACTUAL", "VIRTUAL", "Kind", "MergeRule", "MergeTable", "Symbol",
    "build_merge_table", "set_kind", "validate_properness",
    "PretokenizerSpec", "WordHistogram", "build_histogram", "merge_histograms", "pretokenize",
    "Encoder", "TokenizedCorpus", "detokenize", "reference_tokenize", "tokenize_corpus", "tokenize_word",
    "FrequencyIndex", "build_index",
    "AdaptConfig", "AdaptationResult", "Adapter", "SwapRecord", "adapt",
    "first_k", "first_k_positive", "top_k",
    "EvalReport", "compression_utility", "merge_depth", "sweep",
]
