"""Numerical core: response model, closed forms, simulation and audits."""
