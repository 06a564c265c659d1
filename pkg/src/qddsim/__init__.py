"""Planar simulator of a two-finger quasi-direct-drive hand.

Submodules
----------
transmission  differential drive maps, finger kinematics, workspace
foc           dq motor plant, Clarke/Park transforms, PI current loops
impedance     Cartesian / joint impedance controllers and scheduling
contact       collision primitives and penalty contact forces
closure       force- and form-closure tests
simplex       small dense LP solver used by the closure tests
sim           coupled fingers + motors + object integration
scenarios     declarative experiment presets, config parsing, CSV/JSON output
"""

__version__ = "0.1.0"
