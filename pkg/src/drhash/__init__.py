"""Distortion-resistant hashing of nucleotide sequences."""
