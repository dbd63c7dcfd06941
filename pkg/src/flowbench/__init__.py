"""Compare the benign traffic of flow datasets feature by feature."""

__version__ = "0.1.0"
