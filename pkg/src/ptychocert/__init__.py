"""Blind-ptychography scheme certification and ambiguity verification toolkit."""

__version__ = "0.1.0"
