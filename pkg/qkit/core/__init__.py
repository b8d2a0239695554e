"""Primitives, protocols, provers and analysis."""
