"""Toolkit for measuring, reconciling, and globally linking the tags of
open data portals."""

__version__ = "0.1.0"
