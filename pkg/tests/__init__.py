"""Test package for dense_face."""
