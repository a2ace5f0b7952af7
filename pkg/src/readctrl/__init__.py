"""Toolkit for readability-controlled text generation and its evaluation."""

__version__ = "0.1.0"

# schema version for serialized artifacts (instruction records, generation
# records, verdicts); bump on any breaking field change
SCHEMA_VERSION = 1
