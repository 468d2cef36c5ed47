"""Numerical free probability at desk scale.

Free additive convolution with a semicircle time component via analytic
subordination, spectral edge and scale extraction, random-matrix sampling of
A + U B U* + sqrt(t) W, a Tracy-Widom F2 evaluator, and statistical
verification harnesses for edge universality, local laws and rigidity.
"""

from . import measure, subordination, edge, tracywidom, rmt, harness, cli

__all__ = ["measure", "subordination", "edge", "tracywidom", "rmt", "harness",
           "cli"]
__version__ = "0.1.0"
