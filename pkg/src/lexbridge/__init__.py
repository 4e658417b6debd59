"""Cross-script lexical retrieval between Tajik Cyrillic and Persian Perso-Arabic."""

__version__ = "0.1.0"
