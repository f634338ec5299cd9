"""Desk-scale end-to-end navigation: CNN color+depth fusion steering
networks trained by imitation in a deterministic differential-drive
simulator, with offline metrics and closed-loop trial harnesses."""

__version__ = "0.1.0"
