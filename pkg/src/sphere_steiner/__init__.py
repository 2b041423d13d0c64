"""Three-terminal minimal networks on S^2 and in the plane, with calibration checks."""

__version__ = "0.1.0"
