"""Bayesian multivariate variable selection with spike-and-slab priors."""
