"""Directional neighbor discovery for vehicles on a road: scenario geometry,
beam occupancy statistics, the discovery probability model, a slot-level
simulator and an experiment harness."""

__version__ = "0.1.0"
