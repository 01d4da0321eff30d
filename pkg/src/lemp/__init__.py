"""Lightning electromagnetic pulse fields over lossy ground: reference models and FDTD."""

__version__ = "0.1.0"
