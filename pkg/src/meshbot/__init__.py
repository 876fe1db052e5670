"""Turn a static quadruped mesh into an articulated robot and co-evolve its body and gait."""

__version__ = "0.1.0"
