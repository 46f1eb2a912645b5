"""Singing voice conversion from phonetic posteriorgrams."""
__version__ = "0.1.0"
