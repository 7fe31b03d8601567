"""Test suite for anonymizer package."""
