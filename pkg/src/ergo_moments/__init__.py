"""ergo-moments: a numerical laboratory for moment and deviation inequalities
of dependent sequences, and Monte Carlo scaling experiments for the empirical
process of intermittent interval maps."""

__version__ = "0.1.0"
