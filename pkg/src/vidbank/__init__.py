"""Self-supervised video representation learning with a compressive memory
bank, plus classification, retrieval, data-efficiency, and failure-moment
evaluation protocols."""

__version__ = "0.1.0"
