"""Near-collision and impersonation-attack bounds for binary biometric templates."""

__version__ = "0.1.0"
