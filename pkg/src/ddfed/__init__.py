"""Desk-scale federated learning simulator: FHE-backed secure aggregation
with encrypted-similarity anomaly detection, plus plaintext baselines and
poisoning attacks for defense experiments."""

__version__ = "0.1.0"
