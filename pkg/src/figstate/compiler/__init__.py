"""Action vocabulary, predicates, expressions, and the compilation pipeline."""
