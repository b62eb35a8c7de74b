"""Dual-agent presentation coaching: exemplar video generation from slide
decks in the user's cloned voice, and structured coaching feedback on practice
recordings."""

__version__ = "0.1.0"
