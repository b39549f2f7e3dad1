"""
Optimization engines: barrier solver, power allocation, schedulers, bounds and benchmarks.
"""
