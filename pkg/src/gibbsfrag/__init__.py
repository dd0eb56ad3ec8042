"""Gibbs partitions from stable subordinators, with fragmentation and coagulation operators."""

__version__ = "0.1.0"
