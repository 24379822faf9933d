"""Flow-based incident classification with analyst-feedback retraining."""

__version__ = "0.1.0"
