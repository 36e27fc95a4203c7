"""Bayesian finite mixture clustering of mixed-type data with spike-and-slab
variable weights and detection-limit censoring."""

__version__ = "0.1.0"
