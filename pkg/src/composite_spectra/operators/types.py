from enum import Enum


class OperatorFamily(Enum):
    INTEGRATION = "integration"
    HAUSDORFF = "hausdorff"
    MULTIPLICATION = "multiplication"
    EMBEDDING = "embedding"
    COMPOSITE = "composite"


class BasisTag(Enum):
    """Coordinate space a matrix dimension lives in."""

    LEGENDRE = "legendre"
    MOMENT = "moment"
    COORDINATE = "coordinate"
    NODAL = "nodal"
