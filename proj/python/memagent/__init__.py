"""Episodic-memory question answering over first-person video captions."""

from ._core import (
    ArgumentError,
    CaptionRecord,
    Chunk,
    ChunkMetadata,
    ConfigError,
    Error,
    FormatError,
    HashedBowEmbedder,
    Memory,
    ProviderError,
    SourceError,
    VectorStore,
    bleu4,
    chunk_captions,
    load_caption_fixture,
    meteor,
    normalized_words,
    porter_stem,
    rouge_l_f,
    sentence_bleu4,
    tokenize,
    window_count,
)

__all__ = [name for name in dir() if not name.startswith("_")]
