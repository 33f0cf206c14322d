"""Frequency-time integration network for inertial odometry."""

__version__ = "0.1.0"
