"""Interpretable mesomorphic networks for tabular data."""
