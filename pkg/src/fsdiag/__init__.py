"""Functor string diagrams as a compiler toolkit."""
__version__ = "0.1.0"
