"""Music emotion recognition from per-frame audio features with recurrent classifiers."""

__version__ = "0.1.0"
