"""Numerical laboratory for logarithmic vorticity-gradient growth in a
two-dimensional incompressible flow with a second-order Riesz forcing.

The package integrates a leading-order model exactly solvable by
characteristics, solves the associated elliptic mode problems, evolves the
full system on a polar grid, and measures how far the two stay apart as
the scaling parameter alpha shrinks.
"""

__version__ = "0.1.0"
