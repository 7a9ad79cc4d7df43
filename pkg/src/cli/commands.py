"""
commands.py - Command handlers behind main.py.

Every handler takes a RunConfig and returns a Report; CSV side outputs are written
into config.output_dir. Numerical failures propagate as ToricError subclasses so
that main.py can map them to exit codes.
"""

import os

import numpy as np

from src.geometry.lattice import delzant_check
from src.geometry.serialization import geometry_from_dict, load_geometry
from src.potentials.legendre import check_boundary_behavior, guillemin_potential, sample_on_polyhedron
from src.soliton.continuity import (
    ContinuityState,
    conservation_drift,
    continuity_solve,
    equation_tolerance,
    far_field_fit,
    fitted_constants,
    monitors_bounded,
)
from src.soliton.functionals import functional_Fhat, functional_I, functional_J
from src.soliton.model import TorusModel, gaussian_bump, normalize_data
from src.soliton.weighted_volume import (
    WeightedVolumeProblem,
    futaki_residual,
    minimize_F,
    resolve_prefactor,
)
from src.utils.errors import BoundaryBehaviorViolated, ConfigError, ContinuationError
from src.utils.logger import setup_logger
from src.utils.report import Report, write_csv

logger = setup_logger("commands")

MODELS = ("gaussian", "guillemin")
FHAT_SPACING = {1: 0.01, 2: 0.05}
DEFAULT_BUMP = {"amplitude": 0.0, "center": 0.0, "width": 1.0}


def _report(config):
    return Report(config.echo(), {"config": config.echo(), "run": config.run})


def _geometry(config):
    if "geometry" in config.run:
        return geometry_from_dict(config.run["geometry"])
    if not config.input_path:
        raise ConfigError(f"{config.command} needs a geometry")
    return load_geometry(config.input_path)


def _soliton_vector(polyhedron, config):
    problem = WeightedVolumeProblem(polyhedron, config.prefactor_mode)
    return problem, minimize_F(problem, tol=config.tolerances["grad"])


# ---------------- polytope ----------------
def cmd_polytope(config):
    """Vertices, edges, Delzant report and recession cone of the input geometry"""
    polyhedron, fan = load_geometry(config.input_path)
    report = _report(config)
    report.add("dim", polyhedron.dim)
    report.add("facets", polyhedron.n_facets)
    report.add("vertices", [list(v.point) for v in polyhedron.vertices])
    report.add("edges", [[list(e) for e in v.edge_dirs] for v in polyhedron.vertices])
    report.add("recession_rays", [list(w) for w in polyhedron.recession_rays])
    report.add("bounded", polyhedron.is_bounded)
    delzant = delzant_check(polyhedron)
    report.add("delzant", delzant.ok)
    if not delzant.ok:
        report.add("delzant_vertex", list(delzant.vertex.point))
        report.add("delzant_determinant", delzant.determinant)
    if fan is not None:
        report.add("fan_rays", [list(r) for r in fan.rays])
        report.add("fan_smooth", fan.is_smooth)
    return report


# ---------------- soliton-vector ----------------
def cmd_soliton_vector(config):
    """b_X by damped Newton on the weighted volume functional, with a CSV trace"""
    polyhedron, _ = _geometry(config)
    problem, result = _soliton_vector(polyhedron, config)

    write_csv(os.path.join(config.output_dir, "soliton_trace.csv"), result.trace_header(), result.trace_rows())
    report = _report(config)
    report.add("b_X", result.b_X)
    report.add("grad_norm", result.grad_norm)
    report.add("iterations", result.iterations)
    report.add("F", result.value)
    report.add("hessian_cond", result.hessian_cond)
    report.add("futaki_residual", float(np.linalg.norm(futaki_residual(problem, result.b_X))))
    report.check("converged", result.grad_norm / result.value < config.tolerances["grad"],
                 f"|grad|/F = {result.grad_norm / result.value:.3e}")
    return report


# ---------------- verify ----------------
def cmd_verify(config):
    """Run the named verification suite"""
    from src.cli.verify_suites import run_suite

    report = _report(config)
    report.add("case", config.flags["case"])
    run_suite(config.flags["case"], config, report)
    return report


# ---------------- continuity ----------------
def _bump_options(run):
    options = dict(DEFAULT_BUMP)
    options.update(run.get("bump", {}))
    return options


def build_model(config):
    """TorusModel described by the run JSON and grid flags"""
    run = config.run
    name = run.get("model", "guillemin" if "geometry" in run else "gaussian")
    if name not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {name!r}")
    span = config.flags["grid_span"]
    h = config.flags["grid_h"]
    kwargs = {"prefactor": config.prefactor_mode}
    if span is not None:
        kwargs["lo"], kwargs["hi"] = (float(v) for v in span)
    if h is not None:
        kwargs["h"] = float(h)

    if name == "gaussian":
        dim = int(run.get("dim", 1))
        return TorusModel.gaussian(dim, **kwargs)

    if "geometry" not in run:
        raise ConfigError("the guillemin model needs a geometry")
    polyhedron, _ = geometry_from_dict(run["geometry"])
    if "b" in run:
        b = np.asarray(run["b"], dtype=float)
    else:
        b = _soliton_vector(polyhedron, config)[1].b_X
    return TorusModel.from_polyhedron(polyhedron, b, **kwargs)


def _path_rows(path):
    # The s = 0 state is the trivial start; rows cover s_1 .. s_k
    return [state.as_row() for state in path.states[1:]]


def cmd_continuity(config):
    """Continuity path with per-step monitor CSV and a final psi snapshot"""
    model = build_model(config)
    bump = _bump_options(config.run)
    F_raw = model.F_ref + gaussian_bump(model, bump["amplitude"], bump["center"], bump["width"]).values
    F, c0 = normalize_data(model, F_raw)
    report = _report(config)
    report.add("model", model.name)
    report.add("c0", c0)
    report.add("nodes", int(np.prod(model.grid.shape)))
    csv_path = os.path.join(config.output_dir, "continuity_path.csv")

    try:
        path = continuity_solve(model, F, steps=int(config.flags["steps"]), c0=c0,
                                newton_tol=config.tolerances["newton"])
    except ContinuationError as e:
        report.add("failed_at_s", e.s)
        report.add("last_good_s", getattr(e, "last_good_s", None))
        report.add("failure", type(e).__name__)
        report.add("last_monitors", e.monitors)
        report.check("reached_s1", False, f"{type(e).__name__} at s = {e.s}")
        report.write(config.output_dir)
        raise

    write_csv(csv_path, ContinuityState.header(), _path_rows(path))
    final = path.final
    final.psi.to_csv(os.path.join(config.output_dir, "psi_final.csv"))

    I = functional_I(model, final.psi)
    J = functional_J(model, final.psi)
    try:
        fit = far_field_fit(model, final)
    except ContinuationError as e:
        logger.warning(f"⚠️ no far-field fit: {e}")
        fit = None
    bounded = monitors_bounded(path)
    report.add("steps", len(path.states) - 1)
    report.add("s_final", final.s)
    report.add("residual_norm", final.residual_norm)
    report.add("system_residual", final.system_residual)
    report.add("conservation_drift", conservation_drift(path))
    report.add("multiplier", final.multiplier)
    report.add("I", I)
    report.add("J", J)
    report.add("I_minus_J", I - J)
    report.add("monitor_constants", fitted_constants(path))
    report.add("monitors_bounded", bounded)
    if fit is not None:
        report.add("far_field", {"c1": fit.c1, "c2": fit.c2, "residual": fit.residual,
                                 "constant_residual": fit.constant_residual})
    newton_tol = config.tolerances["newton"]
    tolerance = equation_tolerance(model, newton_tol)
    report.add("equation_tolerance", tolerance)
    report.check("reached_s1", final.s == 1.0 and final.system_residual < newton_tol,
                 f"s = {final.s}, |G| = {final.system_residual:.3e}")
    report.check("equation_residual", final.residual_norm < tolerance,
                 f"{final.residual_norm:.3e} against {tolerance:.3e}")
    return report


# ---------------- fhat ----------------
def cmd_fhat(config):
    """F-hat between the Guillemin potential and a bumped symplectic potential"""
    polyhedron, _ = _geometry(config)
    if "b" in config.run:
        b = np.asarray(config.run["b"], dtype=float)
    else:
        b = _soliton_vector(polyhedron, config)[1].b_X
    bump = _bump_options(config.run)
    center = np.broadcast_to(np.asarray(bump["center"], dtype=float), (polyhedron.dim,))
    spacing = config.flags["grid_h"] or FHAT_SPACING.get(polyhedron.dim, 0.05)

    def u0(x):
        return guillemin_potential(polyhedron, x)

    def u1(x):
        pts = x[..., None] if polyhedron.dim == 1 else x
        r2 = np.sum((pts - center) ** 2, axis=-1)
        return u0(x) + bump["amplitude"] * np.exp(-r2 / bump["width"] ** 2)

    truncation = float(config.flags["truncation_R"])
    f0 = sample_on_polyhedron(polyhedron, u0, spacing, truncation)
    f1 = sample_on_polyhedron(polyhedron, u1, spacing, truncation)
    value = functional_Fhat(f0, f1, b, prefactor=resolve_prefactor(config.prefactor_mode, polyhedron.dim))

    report = _report(config)
    report.add("b", b)
    report.add("Fhat", value)
    report.add("nodes", int(f0.mask.sum()))
    report.check("u1_convex", f1.is_convex())
    try:
        check_boundary_behavior(f1, polyhedron)
        report.check("boundary_behavior", True)
    except BoundaryBehaviorViolated as e:
        report.check("boundary_behavior", False, str(e))
    return report


COMMAND_HANDLERS = {
    "polytope": cmd_polytope,
    "soliton-vector": cmd_soliton_vector,
    "verify": cmd_verify,
    "continuity": cmd_continuity,
    "fhat": cmd_fhat,
}
