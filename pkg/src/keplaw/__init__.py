"""Rediscover planetary-motion laws from Tycho Brahe's Mars catalog.

A neural regressor fits and densifies the observations, simulated-annealing
symbolic regression turns the fitted curves into small formulas, and an
interpreter reads orbital parameters and power laws off those formulas.
"""

__version__ = "0.1.0"
