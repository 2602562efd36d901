"""TDMA scheduling, rate adaptation, SNR estimation and network simulation for real-time WiFi."""

__version__ = "0.1.0"
