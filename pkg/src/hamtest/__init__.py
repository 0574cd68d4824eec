"""Property testing of Hamiltonians from black-box time evolution."""

__version__ = "0.1.0"
