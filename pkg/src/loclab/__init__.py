"""loclab: numerical experiments on stochastic localization of log-concave measures."""
__version__ = "0.1.0"
