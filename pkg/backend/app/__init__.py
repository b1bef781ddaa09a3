"""Indian buffet game library, experiment harness and HTTP service."""
