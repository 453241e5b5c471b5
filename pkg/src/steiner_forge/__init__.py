"""Random Steiner triple systems and Latin squares: generation, removal
processes, quasirandomness checks, exact counting and absorber-based
perfect matchings."""

__version__ = "0.1.0"

from .design import PartialSystem, fano, affine_plane_3, validate, encode, parse, load  # noqa: E402,F401
