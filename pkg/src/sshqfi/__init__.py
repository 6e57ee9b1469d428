"""Phase metrology of a quantum emitter in a bosonic SSH bath."""
__version__ = "0.1.0"
