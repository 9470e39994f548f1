"""Visual-generalization benchmark for pixel-based continuous control."""

__version__ = "0.1.0"
