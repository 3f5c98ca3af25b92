"""cascade-lab: resonant sets, frequency models, normal forms and cascade dynamics
for the cubic Schrodinger equation on the two-torus near finite-gap tori."""

__version__ = "0.1.0"

__all__ = ["lattice", "spectrum", "resonance", "normal_form", "dynamics", "harness", "__version__"]
