"""Linear transfers, Kantorovich operators, balayage and capacities on finite spaces."""
__version__ = "0.1.0"
