"""Precondition inference for constrained Horn clause programs."""
