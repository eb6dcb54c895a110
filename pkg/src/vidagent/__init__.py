"""Accessible video player engine: content index, tiered audio descriptions,
and a voice-driven multimodal agent."""

__version__ = "0.1.0"
