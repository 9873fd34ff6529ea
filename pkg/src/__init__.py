"""Optimal flow-rate control of fixed-bed ion-exchange chromate removal."""

__version__ = "0.1.0"
