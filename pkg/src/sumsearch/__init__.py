"""Tree-transformer code summarization with comment-augmented code search."""

from .config import TrainConfig, load_config
from .corpus import (
    CodeCommentPair,
    CorpusError,
    PairSet,
    Vocab,
    build_vocab,
    encode_ids,
    load_corpus,
    split_corpus,
)
from .indent_tree import EncodePlan, IndentTree, IndentTreeError, build_tree, postorder_schedule
from .model import Summarizer
from .search import SearchConfig, SearchIndex, build_index, rank, tune_beta
from .tokenizer import TokenSeq, tokenize_code, tokenize_nl
from .training import RewardConfig, TrainResult, bleu_reward, train

__all__ = [
    "CodeCommentPair",
    "CorpusError",
    "EncodePlan",
    "IndentTree",
    "IndentTreeError",
    "PairSet",
    "RewardConfig",
    "SearchConfig",
    "SearchIndex",
    "Summarizer",
    "TokenSeq",
    "TrainConfig",
    "TrainResult",
    "Vocab",
    "bleu_reward",
    "build_index",
    "build_tree",
    "build_vocab",
    "encode_ids",
    "load_config",
    "load_corpus",
    "postorder_schedule",
    "rank",
    "split_corpus",
    "tokenize_code",
    "tokenize_nl",
    "train",
    "tune_beta",
]

__version__ = "0.1.0"
