"""edgetree: train tiny decision-tree flow classifiers and emit them as C source."""

__version__ = "0.1.0"
