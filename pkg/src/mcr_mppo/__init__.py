"""Mahjong (MCR) engine, scripted bots and a mixed self-play/demonstration PPO learner."""

__version__ = "0.1.0"
