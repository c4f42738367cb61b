"""deepwarp - tiefe kompositionelle Raummodelle mit injektiven Warpings."""

__version__ = "0.1.0"
