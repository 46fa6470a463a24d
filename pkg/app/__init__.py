"""Minimum probability-of-ruin solver and decumulation toolkit."""
