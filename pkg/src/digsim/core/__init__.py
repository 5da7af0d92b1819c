from .body import Body, DIRECT, ITERATIVE
from .constraints import (AngleLimit, AngleMotor, ConstraintRow, Hinge,
                          LinearActuator, make_motor)
from .contacts import ContactSet, detect_contacts
from .materials import ContactMaterial, Material, MaterialTable
from .shapes import Disc, Marker, Polygon, Polyline, ShapeError
from .world import (SolverConfig, StepDiagnostics, StepError, World,
                    apply_impacts, solve_pgs)

__all__ = [
    "Body", "DIRECT", "ITERATIVE", "AngleLimit", "AngleMotor", "ConstraintRow", "Hinge",
    "LinearActuator", "make_motor", "ContactSet", "detect_contacts",
    "ContactMaterial", "Material", "MaterialTable", "Disc", "Marker", "Polygon",
    "Polyline", "ShapeError", "SolverConfig", "StepDiagnostics", "StepError",
    "World", "apply_impacts", "solve_pgs",
]
