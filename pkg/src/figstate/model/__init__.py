"""Core figure model: slices, charts, and figure states."""
