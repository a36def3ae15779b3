"""Local scripts package for the desk harness.

This file silences linter warnings about implicit namespace packages
for the `scripts/` directory.
"""
