"""ltlab: local times, collisions and intersections of anisotropic Gaussian fields."""

__version__ = "0.1.0"
