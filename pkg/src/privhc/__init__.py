"""privhc: two-party privacy-preserving hierarchical clustering.

A library and CLI implementing plaintext agglomerative clustering, a
Paillier + garbled-circuit protocol for joint clustering over split data,
an optimized single-linkage variant, and CURE-based approximate variants,
with bandwidth metering and benchmark reporting.
"""

__version__ = "0.1.0"
