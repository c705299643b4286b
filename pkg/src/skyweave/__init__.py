"""Reactive-synthesis engine and simulated-UAV runtime for assured mission adaptation."""

__version__ = "0.1.0"
