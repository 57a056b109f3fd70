"""Layer-distributed CNN inference over a UAV swarm with joint trajectory planning."""

__version__ = "0.1.0"
