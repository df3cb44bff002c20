"""Figure rendering for torus-RGG experiment CSV output."""

__version__ = "0.1.0"

from .render import FigureJob, MissingColumnsError, render
