"""Exception types shared across the package."""


class VoxdetailError(Exception):
    """Base class for all package errors."""


class FormatError(VoxdetailError):
    """Corrupt or unrecognized file content (bad magic, dims, tensor names)."""


class DimensionError(VoxdetailError):
    """Grid or tensor dimensions violate an operation's requirements."""


class ParameterError(VoxdetailError):
    """A scalar argument is outside its legal range."""


class KindError(VoxdetailError):
    """Operation applied to the wrong grid kind (binary vs continuous)."""


class EmptyShapeError(VoxdetailError):
    """Operation requires at least one occupied voxel."""


class ShapeError(VoxdetailError):
    """Tensor shapes are incompatible."""


class ConfigError(VoxdetailError):
    """Invalid training/evaluation configuration."""


class DegenerateSampleError(VoxdetailError):
    """A training sample produced an all-zero loss mask and must be skipped."""


class DegeneracyError(VoxdetailError):
    """Geometric degeneracy (e.g. collinear points passed to triangulation)."""


class UndefinedMetricError(VoxdetailError):
    """Metric has no defined value for this input (e.g. empty reference set)."""
