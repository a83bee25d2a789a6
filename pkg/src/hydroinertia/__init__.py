"""Reduced-order simulation of hydro inertia services.

Models a variable-speed pumped-storage unit (and its fixed-speed
counterpart) delivering synchronous or synthetic inertia to an infinite
or islanded grid, together with the closed-form analytics the plant-level
numbers derive from.
"""

__version__ = "0.1.0"
