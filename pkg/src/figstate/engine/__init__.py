"""Embedded deterministic tabular execution."""
