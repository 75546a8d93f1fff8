"""Simulator for membrane computers built from multivesicular liposomes."""

__version__ = "0.1.0"
