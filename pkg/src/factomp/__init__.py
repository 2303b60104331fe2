"""Factorized continuous orthogonal matching pursuit."""
