"""Knowledge-graph completion with an induced-subgraph transformer."""

from ._core import (
    G2G,
    Session,
    adaptive_beta2,
    hits_at_k,
    mrr,
    rank,
    read_embedding_cache,
    total_loss,
    write_embedding_cache,
)

__all__ = [
    "G2G",
    "Session",
    "adaptive_beta2",
    "hits_at_k",
    "mrr",
    "rank",
    "read_embedding_cache",
    "total_loss",
    "write_embedding_cache",
]
