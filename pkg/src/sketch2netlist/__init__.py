"""Rebuild an electrical netlist from a scanned hand-drawn circuit and its component detections."""

__version__ = "0.1.0"
