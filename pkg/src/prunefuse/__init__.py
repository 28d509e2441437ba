"""Pruned-selector active learning with weight-aligned fusion."""
