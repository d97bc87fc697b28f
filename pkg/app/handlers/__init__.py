"""Handlers for scenario directives; each returns controller state updates."""
