"""Core utilities for the SVGA detection toolkit: configuration, errors, file I/O, console and profiling."""
