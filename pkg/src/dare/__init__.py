"""Domain-adjusted regression (DARE) and theorem-verification experiments."""

__version__ = "0.1.0"
