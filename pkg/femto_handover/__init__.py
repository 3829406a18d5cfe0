"""Femtocell/macrocell handover simulator and traffic analytics."""

__version__ = "1.0.0"
