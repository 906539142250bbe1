"""Table-top scene analysis with Markov-logic priors and data-driven MCMC."""

__version__ = "0.1.0"
