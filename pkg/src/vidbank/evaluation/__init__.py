from .embeddings import (
    EmbeddingSet,
    extract_embedding,
    extract_embeddings,
    load_embeddings_csv,
    save_embeddings_csv,
)
from .probes import data_efficiency_sweep, finetune_classifier, train_probe
from .retrieval import retrieve
from .unintentional import unintentional_train_eval
from .memory_export import export_memory_views

__all__ = [
    "EmbeddingSet",
    "extract_embedding",
    "extract_embeddings",
    "save_embeddings_csv",
    "load_embeddings_csv",
    "train_probe",
    "finetune_classifier",
    "data_efficiency_sweep",
    "retrieve",
    "unintentional_train_eval",
    "export_memory_views",
]
