"""Core package for the ExCogNet-MT test bench simulator."""
