"""Federated sigmoid-MLP training with a hash-chained model ledger and an IDS access gate."""

__version__ = "0.1.0"
