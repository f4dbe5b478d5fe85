"""Sentence-insertion graph network: global attention, local GCN with
multi-scale fingerprints, global-local fusion, coherence and pairwise-order
baselines, dataset synthesis, and a deterministic training harness."""

__version__ = "0.1.0"
