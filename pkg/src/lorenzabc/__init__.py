"""Grouped-data income inequality estimation."""
