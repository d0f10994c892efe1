"""Consistent-histories analysis of counterfactual-communication interferometers."""

__version__ = "0.1.0"
