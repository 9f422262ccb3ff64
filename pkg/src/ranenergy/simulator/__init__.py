"""Simulator core: topology, radio, energy, engine and metrics."""
