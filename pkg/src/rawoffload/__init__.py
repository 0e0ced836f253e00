"""Pre-demosaic RAW-frame edge offloading: tile codec, transmission control, link simulation."""

__version__ = "0.1.0"
