"""Spectral toolkit for the heat equation driven by the spherical Grushin operator.

Modules: ``numerics`` (quadrature, differentiation), ``legendre`` (eigen
basis), ``spectral`` (mode evolution), ``transforms`` and ``hardy``
(unweighted form and Hardy checks), ``carleman`` (weights and kernels),
``observability`` and ``hum`` (observation and control per mode), ``cli``.
"""
__version__ = "0.1.0"
