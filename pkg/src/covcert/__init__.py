"""covcert: privacy-preserving, ledger-anchored certification toolkit."""

__version__ = "0.1.0"
