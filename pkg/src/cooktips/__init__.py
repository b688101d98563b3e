"""Cooking text-game harness for language-model agents that learn from their own tips."""

__version__ = "0.1.0"
