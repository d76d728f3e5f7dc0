"""Two-stage synthesis of Pareto-optimal shared-autonomy policies."""

__version__ = "0.1.0"
