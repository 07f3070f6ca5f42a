"""Broadcast network protocols: coverability, witnesses and exact cutoffs."""
