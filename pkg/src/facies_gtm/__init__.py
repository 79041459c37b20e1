"""Seismic facies classification: GLCM texture attributes, RBF gap filling and a GTM latent map."""

__version__ = "0.1.0"
