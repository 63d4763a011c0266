"""Diffusion curvature of point clouds and local Hessian estimation."""

__version__ = "0.1.0"
