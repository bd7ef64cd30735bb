"""Multimodal intent classification with out-of-distribution detection.

Pipeline pieces: a simple embedding-corpus format, pseudo-OOD synthesis via
Dirichlet convex combinations, per-modality transformer-style encoders, a
learned weighted fusion network, two-stage (binary then multi-class +
contrastive) training, and six OOD scoring functions with threshold-sweep
evaluation metrics.
"""

__version__ = "0.1.0"
