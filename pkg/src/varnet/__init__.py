"""Variation-constrained deep feedforward networks."""
