"""Allocation traces as 2D bin packing: offline placement, simulators, metrics."""
