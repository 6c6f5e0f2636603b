"""Polling on a circle with batch arrivals: analysis and simulation."""
