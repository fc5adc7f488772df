"""Tests for zgkn."""
