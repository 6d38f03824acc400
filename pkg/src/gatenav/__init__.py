"""Drone motion-planning sandbox: PPO agent, potential-field baseline, synthetic perception."""

__version__ = "0.1.0"
