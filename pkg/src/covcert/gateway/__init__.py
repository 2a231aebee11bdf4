"""Service facade, benchmark harness, and CLI."""
