"""Text-conditioned protein sequence editing at desk scale."""

__version__ = "0.1.0"
