"""Convolutional-autoencoder feature extraction and market-efficiency tests for cryptocurrencies."""

__version__ = "0.1.0"
