"""Master equations for systems driven by streams of entangled qubits."""
__version__ = "0.1.0"
