"""
serialization.py - JSON schemas for fans and polyhedra.

  fan:        {"dim": n, "rays": [[..], ..], "max_cones": [[..], ..], "blowups": [[i, j], ..]}
  polyhedron: {"dim": n, "halfspaces": [{"normal": [..], "offset": q}, ..]}

Offsets may be ints, decimal strings ("0.5") or fractions ("1/3"); all are parsed
exactly.
"""

from sympy import Rational, SympifyError

from src.geometry.lattice import Fan, HalfSpace, Polyhedron, anticanonical_polyhedron, blowup_cone
from src.utils.config import check_keys, load_json
from src.utils.errors import ConfigError, GeometryError
from src.utils.logger import setup_logger

logger = setup_logger("serialization")

FAN_KEYS = {"dim", "rays", "max_cones", "blowups"}
POLYHEDRON_KEYS = {"dim", "halfspaces"}
HALFSPACE_KEYS = {"normal", "offset"}


def _int_vector(values, where):
    try:
        if any(isinstance(v, float) or (isinstance(v, str) and not v.lstrip("-").isdigit()) for v in values):
            raise ValueError
        return tuple(int(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where} must be a list of integers, got {values!r}") from e


def parse_offset(value):
    """Exact rational from an int, decimal string or 'p/q' string"""
    if isinstance(value, bool):
        raise ConfigError(f"offset must be a number, got {value!r}")
    try:
        return Rational(str(value))
    except (SympifyError, TypeError, ValueError) as e:
        raise ConfigError(f"cannot parse offset {value!r}") from e


def fan_from_dict(data):
    """Build a Fan and apply its optional blowups in order"""
    check_keys(data, FAN_KEYS, "fan")
    if "dim" not in data or "rays" not in data:
        raise ConfigError("fan needs 'dim' and 'rays'")
    rays = [_int_vector(r, "ray") for r in data["rays"]]
    cones = [_int_vector(c, "cone") for c in data.get("max_cones", [])]
    fan = Fan(int(data["dim"]), tuple(rays), tuple(cones))
    for cone in data.get("blowups", []):
        fan = blowup_cone(fan, _int_vector(cone, "blowup cone"))
    return fan


def polyhedron_from_dict(data):
    check_keys(data, POLYHEDRON_KEYS, "polyhedron")
    if "dim" not in data or "halfspaces" not in data:
        raise ConfigError("polyhedron needs 'dim' and 'halfspaces'")
    halfspaces = []
    for entry in data["halfspaces"]:
        check_keys(entry, HALFSPACE_KEYS, "halfspace")
        halfspaces.append(HalfSpace(_int_vector(entry["normal"], "normal"), parse_offset(entry["offset"])))
    return Polyhedron(int(data["dim"]), tuple(halfspaces))


def geometry_from_dict(data):
    """Return (polyhedron, fan-or-None); invalid geometry here is an input error (exit 64)"""
    try:
        return _parse_geometry(data)
    except GeometryError as e:
        e.exit_code = ConfigError.exit_code
        raise


def _parse_geometry(data):
    # Fans go through their anticanonical polyhedron
    if not isinstance(data, dict):
        raise ConfigError("geometry must be a JSON object")
    if "rays" in data:
        fan = fan_from_dict(data)
        return anticanonical_polyhedron(fan), fan
    if "halfspaces" in data:
        return polyhedron_from_dict(data), None
    raise ConfigError("geometry JSON needs either 'rays' (fan) or 'halfspaces' (polyhedron)")


def load_geometry(path):
    """Read a fan or polyhedron JSON file"""
    data = load_json(path, exact=True)
    try:
        polyhedron, fan = geometry_from_dict(data)
    except GeometryError:
        logger.error(f"❌ invalid geometry in {path}")
        raise
    logger.info(f"loaded {'fan' if fan else 'polyhedron'} from {path}: "
                f"{polyhedron.n_facets} facets, {len(polyhedron.vertices)} vertices")
    return polyhedron, fan
