"""Second-order (dispersion) achievability bounds for lossy coding with side
information, plus desk-scale Monte-Carlo validation of the coding schemes."""

__version__ = "0.1.0"
