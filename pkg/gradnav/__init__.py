"""
Differentiable simulation and training stack for vision-based drone navigation.
"""

__version__ = "0.1.0"
