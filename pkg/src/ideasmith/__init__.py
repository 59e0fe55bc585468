"""Steerable agentic research-ideation system.

Three agent roles (ideator, writer, evaluator) over an enhanced retrieval
pipeline, gated by three human-control levels, with version provenance,
behavioral telemetry, an HTTP service, and a pairwise evaluation harness.
"""

__version__ = "0.1.0"
