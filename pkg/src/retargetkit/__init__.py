"""Content-aware image retargeting toolkit with retargetability learning."""

__version__ = "0.1.0"
