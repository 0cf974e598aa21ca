"""Whitney face-field scheme for small vibrations of thin orthotropic plates."""

__version__ = "0.1.0"
