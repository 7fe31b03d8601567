"""Interface adapters (ports): experiment file format and CLI."""
