"""Fredholm-determinant and oracle evaluators for a softened noncolliding diffusion."""
