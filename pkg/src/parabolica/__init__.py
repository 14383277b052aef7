"""Zero-energy (parabolic) trajectories of the N-centre problem with homogeneous potentials."""

__version__ = "0.1.0"
