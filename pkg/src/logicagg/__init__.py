"""Tree-guided selection and "or"-aggregation of rare binary features."""

__version__ = "0.1.0"
