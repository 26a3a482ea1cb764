"""End-to-end workloads, each checked against a sequential oracle."""
