"""Tests for femto-handover."""
