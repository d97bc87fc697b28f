"""Simulation services: PHY, channel, test bench, mapping and the controller."""
