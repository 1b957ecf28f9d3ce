"""Optimal one-bit mean-squared-error quantizers.

Submodules:

``sources``           zero-mean scalar sources (closed form, discrete, tabulated) and samples
``scalar_quant``      variance-drop sweeps, symmetric optimum, Lloyd-Max, empirical sweeps
``direction_search``  best projection direction for random vectors
``sawbridge``         the (stationary) sawbridge process and its optimal one-bit quantizer
``harness``           the ``onebit`` command-line experiments
"""
__version__ = "0.1.0"
