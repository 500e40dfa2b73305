"""Compiled extension modules (built from ``.pyx`` sources at install time)."""
