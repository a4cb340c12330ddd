"""Three-class Vietnamese hate speech detection (clean / offensive / hate)."""
from .embeddings import EmbeddingTable, VecFile, build_embedding_matrix, parse_vec_file
from .models import ModelSpec, build_model, param_count, predict
from .text import EncodedBatch, Lexicon, Vocabulary, build_vocab, encode_pad, normalize_text, tokenize
from .training import EvalReport, TrainConfig, class_weights, evaluate, fit, stratified_split
from .estimator import HateSpeechClassifier, TextEncoder

__version__ = "0.1.0"
