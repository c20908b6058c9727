"""One-shot sandboxed executor for synthesized evaluation code."""

__version__ = "0.1.0"
