"""Systems of bilinear and sesquilinear forms on mixed graphs."""

__all__ = [
    "config",
    "forms",
    "linearize",
    "canonical",
    "generators",
    "serialization",
]
