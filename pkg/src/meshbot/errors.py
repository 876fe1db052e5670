"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class MeshbotError(Exception):
    exit_code = 1


class ConfigError(MeshbotError):
    exit_code = 2


class IngestionError(MeshbotError):
    exit_code = 3


class GeometryError(MeshbotError):
    exit_code = 4


class MeshFormatError(GeometryError):
    pass


class DegenerateMeshError(GeometryError):
    pass


class UnrepairableMeshError(GeometryError):
    pass


class OrientationError(GeometryError):
    pass


class EmptyResultError(GeometryError):
    pass


class SegmentationError(GeometryError):
    pass


class AssemblyError(GeometryError):
    pass


class EvaluationError(MeshbotError):
    exit_code = 5


class ProtocolSchemaError(EvaluationError):
    pass


class EvaluationTimeout(EvaluationError):
    pass
