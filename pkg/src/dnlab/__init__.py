"""
dnlab: a numerical laboratory for recovering semilinear terms of parabolic
equations from lateral Dirichlet-to-Neumann data.
"""
__version__ = "0.1.0"
