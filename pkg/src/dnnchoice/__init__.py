"""Neural-network discrete choice models and the economic information they carry."""

__version__ = "0.1.0"
