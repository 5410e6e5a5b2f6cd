"""Total array gain of mm-wave phone antenna arrays over ray-traced multipath.

Modules: ``core`` (types, rotations, RNG), ``swe`` (spherical wave
expansion), ``antenna`` (patch arrays, finger, orientations),
``propagation`` (ray tracer, channel, calibration), ``blockage`` (torso),
``gain`` (MRC and statistics), ``pipeline``/``report``/``cli`` (batch runs).
"""

__version__ = "0.1.0"
