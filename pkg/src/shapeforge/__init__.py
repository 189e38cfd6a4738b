"""shapeforge: zero-shot text-to-shape generation at desk scale."""

__version__ = "0.1.0"
