"""Voxel shape detailization: 4x conditional refinement of coarse voxel
grids under learned per-exemplar style codes, with the full evaluation
suite, mesh extraction, and a style-space exploration service."""

__version__ = "0.1.0"
