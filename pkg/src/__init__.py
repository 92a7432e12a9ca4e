"""FastQM - quadratic manifold model reduction"""
__version__ = "0.1.0"
