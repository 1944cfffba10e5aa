"""Source separation and voice-quality analysis of multi-speaker recordings."""
__version__ = "0.1.0"
