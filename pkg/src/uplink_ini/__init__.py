"""Multi-numerology DFT-s-OFDM uplink: INI simulation, closed-form INI, max-min SE power allocation."""

__version__ = "0.1.0"
