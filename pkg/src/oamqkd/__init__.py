"""High-dimensional QKD with OAM and angular-position modes."""

__version__ = "0.1.0"
