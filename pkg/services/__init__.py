"""Solver services: geometry and meshes, material, element operators, assembly, time integration and benchmarks."""
