"""Test suite for the SVGA detection toolkit."""
