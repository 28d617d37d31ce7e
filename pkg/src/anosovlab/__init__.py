"""High-precision numerical laboratory for 3-dimensional Anosov suspension
flows: shadowing period asymptotics, eigenvalue recovery, C1-obstruction
functionals, periodic-orbit thermodynamics, and eigendata comparison."""

__version__ = "0.1.0"
