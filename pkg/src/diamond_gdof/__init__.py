"""gDoF toolkit for the noncoherent 2-relay diamond network."""

__version__ = "0.1.0"
