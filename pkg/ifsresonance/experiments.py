"""
One runner per subcommand. Each returns an Outcome: a flat CSV table, a
summary record and, for `render`, an SVG document.
"""
import csv
import math
from contextlib import contextmanager
from fractions import Fraction
from typing import IO, Any, Callable, Dict, Iterator, List, NamedTuple, Optional

from ifsresonance.boxdim import count_series, cylinder_count, estimate_dimension, ladder_delta, scale_ladder
from ifsresonance.config import Command, ExperimentConfig, PlanarConfig
from ifsresonance.drop import (
    coincidence_scale,
    default_translations,
    digit_collision,
    drop_instance,
    essential_pair_bound,
    lattice_sum_dimension,
    resonant_scale,
    resonant_system,
)
from ifsresonance.errors import ConfigError, DomainError
from ifsresonance.homogenize import homogenize_report, reduce_pair, remove_reflections
from ifsresonance.ifs.scalar import Scalar, power
from ifsresonance.ifs.systems import central_cantor, make_ifs, similarity_dimension
from ifsresonance.logger import get_logger
from ifsresonance.marstrand import (
    companion_depth,
    energy_exponent,
    family_constants,
    good_angle_set,
    product_cells,
    size_threshold,
    theta_grid,
)
from ifsresonance.planar import (
    ball_count,
    closed_form_bound,
    dense_rotation_check,
    direction_grid,
    expected_projection_dimension,
    profile_scale_base,
    projection_profile,
    regular_system,
)
from ifsresonance.render import render_svg, render_tower_svg
from ifsresonance.resonance import check_pair
from ifsresonance.schema import IFS1D, IFS2D, BoxCountSeries, Similitude2D
from ifsresonance.settings import settings
from ifsresonance.tower import build_tree, cumulative_bounds, frostman_bound

logger = get_logger(__name__)


class Outcome(NamedTuple):
    header: List[str]
    rows: List[List[Any]]
    summary: Dict[str, Any]
    svg: Optional[str] = None


def format_value(value: Any) -> Any:
    """Deterministic text for CSV cells and summaries: rationals as p/q, floats by repr."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return int(value)
    return value


def write_csv(outcome: Outcome, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(outcome.header)
    for row in outcome.rows:
        writer.writerow([format_value(v) for v in row])


@contextmanager
def budgets(cfg: ExperimentConfig) -> Iterator[None]:
    """The config's budgets and seed in `settings` for the duration of one run."""
    overrides = {"MAX_CELLS": cfg.max_cells, "MAX_PAIRS": cfg.max_pairs, "MAX_TREE_NODES": cfg.max_tree_nodes}
    overrides = {name: value for name, value in overrides.items() if value is not None}
    overrides["SEED"] = cfg.seed
    saved = {name: getattr(settings, name) for name in overrides}
    try:
        for name, value in overrides.items():
            setattr(settings, name, value)
        yield
    finally:
        for name, value in saved.items():
            setattr(settings, name, value)


def left_system(cfg: ExperimentConfig) -> IFS1D:
    if cfg.left is not None:
        return make_ifs(cfg.scalars(cfg.left.ratios), cfg.scalars(cfg.left.translations))
    if cfg.a is not None:
        return central_cantor(cfg.scalar(cfg.a))
    raise ConfigError(["a: the left system is missing; set `a` or a [left] section"])


def right_system(cfg: ExperimentConfig) -> IFS1D:
    if cfg.right is not None:
        return make_ifs(cfg.scalars(cfg.right.ratios), cfg.scalars(cfg.right.translations))
    if cfg.b is not None:
        return central_cantor(cfg.scalar(cfg.b))
    raise ConfigError(["b: the right system is missing; set `b` or a [right] section"])


def planar_system(cfg: ExperimentConfig) -> IFS2D:
    planar = cfg.planar or PlanarConfig()
    if planar.maps:
        maps = tuple(
            Similitude2D(f.scale, math.pi * f.theta_over_pi, f.reflect, (f.translation[0], f.translation[1]))
            for f in planar.maps
        )
        return IFS2D(maps, (planar.center[0], planar.center[1]), planar.radius)
    return regular_system(planar.n, planar.zeta, math.pi * planar.theta_over_pi, planar.reflect)


def _ks(cfg: ExperimentConfig) -> List[int]:
    return list(range(cfg.k_min, cfg.k_max + 1))


def _series_rows(series: BoxCountSeries) -> List[List[Any]]:
    return [[k, delta, count, math.log(count)] for k, delta, count in series.rows]


def _estimate(estimate: Any) -> Dict[str, Any]:
    return {
        "slope": estimate.value,
        "stderr": estimate.stderr,
        "scale_range": list(estimate.scale_range),
        "residual": estimate.residual,
        "degenerate": estimate.degenerate,
    }


def _base(cfg: ExperimentConfig) -> Optional[Scalar]:
    return None if cfg.base is None else cfg.scalar(cfg.base)


def run_resonance(cfg: ExperimentConfig) -> Outcome:
    left, right = left_system(cfg), right_system(cfg)
    verdict = check_pair(left, right, cfg.q_max, cfg.tol)
    rows = []
    for (i, j), witness in sorted(verdict.witnesses.items()):
        p, q = witness if witness is not None else ("", "")
        rows.append([i, j, left.ratios[i], right.ratios[j], p, q])
    summary = {
        "resonant": verdict.resonant,
        "lattice": verdict.lattice,
        "mode": verdict.mode.value,
        "denominator_bound": verdict.denominator_bound,
        "tolerance": verdict.tolerance,
        "note": verdict.note,
    }
    return Outcome(["i", "j", "r_i", "r_prime_j", "p", "q"], rows, summary)


def run_dim(cfg: ExperimentConfig) -> Outcome:
    left = left_system(cfg)
    series = count_series(left, _ks(cfg), base=_base(cfg), workers=cfg.workers)
    estimate = estimate_dimension(series, cfg.skip_coarse)
    summary = {**_estimate(estimate), "similarity_dimension": similarity_dimension(left.ratios)}
    return Outcome(["k", "delta", "count", "log_count"], _series_rows(series), summary)


def run_sumdim(cfg: ExperimentConfig) -> Outcome:
    left, right = left_system(cfg), right_system(cfg)
    s = cfg.scalar(cfg.s) if cfg.s is not None else cfg.scalar(1)
    series = count_series(left, _ks(cfg), right, s, _base(cfg), cfg.workers)
    estimate = estimate_dimension(series, cfg.skip_coarse)
    dims = similarity_dimension(left.ratios) + similarity_dimension(right.ratios)
    summary = {**_estimate(estimate), "dimension_sum": dims, "upper_bound": min(dims, 1.0)}
    return Outcome(["k", "delta", "count", "log_count"], _series_rows(series), summary)


def run_marstrand(cfg: ExperimentConfig) -> Outcome:
    left, right = left_system(cfg), right_system(cfg)
    family = product_cells(left, right, cfg.k, sample_constants=False)
    A, A1, A2 = family_constants(family, seed=cfg.seed)
    angles = good_angle_set(family, cfg.epsilon, cfg.theta_steps, refine=cfg.refine, workers=cfg.workers)
    thetas = theta_grid(angles.theta_steps)
    threshold = size_threshold(cfg.epsilon, angles.delta, len(family))
    rows = [
        [float(theta), int(size), float(length), bool(size >= threshold)]
        for theta, size, length in zip(thetas, angles.sizes, angles.lengths)
    ]
    exponent, _ = energy_exponent(left, right, cfg.energy_k_min, cfg.energy_k_max)
    summary = {
        "cells": len(family),
        "rho": family.rho,
        "delta": angles.delta,
        "bad_measure": angles.bad_measure,
        "bad_bound": cfg.epsilon * math.pi,
        "within_bound": angles.within_bound,
        "intervals": len(angles.intervals),
        "good_measure": angles.good_measure,
        "A": A,
        "A1": A1,
        "A2": A2,
        "energy_exponent": exponent,
        "expected_energy_exponent": family.gamma - 1,
    }
    return Outcome(["theta", "subfamily_size", "projection_length", "good_flag"], rows, summary)


def _tree(cfg: ExperimentConfig) -> Any:
    return build_tree(
        left_system(cfg), right_system(cfg), cfg.tau, cfg.m, cfg.epsilon, cfg.levels,
        scale_steps=cfg.scale_steps, weyl_steps=cfg.weyl_steps, materialize=cfg.materialize,
        q_max=cfg.q_max, tol=cfg.tol, workers=cfg.workers,
    )


def run_tower(cfg: ExperimentConfig) -> Outcome:
    tree, report = _tree(cfg)
    bounds = cumulative_bounds(report.branching, report.m, report.ratio)
    rows = [
        [level.level, level.orbit, level.good, level.children_per_node, bound]
        for level, bound in zip(tree, bounds + [report.certified_slope])
    ]
    summary = {
        "m": report.m,
        "levels": report.levels,
        "certified_slope": report.certified_slope,
        "frostman_bound": frostman_bound(report) if report.levels >= 3 else None,
        "theoretical_slope": report.theoretical_slope,
        "closed_form_slope": report.closed_form_slope,
        "weyl_frequency": report.weyl_frequency,
        "weyl_expected": report.weyl_expected,
        "level_good_frequency": report.level_good_frequency,
        "delta": report.delta,
        "audits_passed": all(all(level.audits.values()) for level in tree),
    }
    return Outcome(["j", "orbit", "good_flag", "C_j", "cumulative_bound"], rows, summary)


def run_homogenize(cfg: ExperimentConfig) -> Outcome:
    left = left_system(cfg)
    reports = [homogenize_report(left, k) for k in range(1, cfg.walk + 1)]
    rows = [[r.k, " ".join(str(v) for v in r.v), r.N_k, r.rho, r.tau] for r in reports]
    last = reports[-1]
    summary = {"k": last.k, "N_k": last.N_k, "rho": format_value(last.rho), "tau": last.tau, "gamma": last.gamma}
    has_right = cfg.b is not None or cfg.right is not None
    if cfg.prune is not None or has_right:
        reduction = reduce_pair(
            left, cfg.walk, right_system(cfg) if has_right else None,
            delta=None if cfg.prune is None else cfg.scalar(cfg.prune),
            epsilon=cfg.epsilon if cfg.subcritical else None, q_max=cfg.q_max, tol=cfg.tol,
        )
        summary["steps"] = [step._asdict() for step in reduction.steps]
        summary["repair"] = None if reduction.repair is None else reduction.repair.value
    return Outcome(["k", "v", "N_k", "rho", "tau"], rows, summary)


def _drop_inputs(cfg: ExperimentConfig) -> tuple:
    if cfg.xi is None or cfg.a_exponents is None or cfg.b_exponents is None:
        raise ConfigError(["drop needs `xi`, `a_exponents` and `b_exponents`"])
    xi = cfg.scalar(cfg.xi)
    t = cfg.scalars(cfg.translations) if cfg.translations else default_translations(xi, cfg.a_exponents)
    t_prime = (cfg.scalars(cfg.translations_prime) if cfg.translations_prime
               else default_translations(xi, cfg.b_exponents))
    return xi, t, t_prime


def run_drop(cfg: ExperimentConfig) -> Outcome:
    xi, t, t_prime = _drop_inputs(cfg)
    inst = drop_instance(xi, cfg.a_exponents or [], cfg.b_exponents or [], t, t_prime)
    bound = essential_pair_bound(inst)
    s = resonant_scale(t, t_prime)
    left = resonant_system(xi, cfg.a_exponents or [], t)
    right = resonant_system(xi, cfg.b_exponents or [], t_prime)
    base = _base(cfg) if cfg.base is not None else 1 / xi
    series = count_series(left, _ks(cfg), right, s, base, cfg.workers)
    estimate = estimate_dimension(series, cfg.skip_coarse)

    summary: Dict[str, Any] = {
        "ell": inst.ell, "a": inst.a, "b": inst.b, "A": inst.A, "B": inst.B, "M0": inst.M0, "M": inst.M,
        "p": inst.p, "q": inst.q, "beta": inst.beta, "beta_prime": inst.beta_prime,
        "essential_pair_bound": bound, "s": format_value(s), **_estimate(estimate),
    }
    try:
        summary["coincidence_scale"] = format_value(coincidence_scale(left, right))
    except DomainError as e:
        logger.info("no coincidence scale: %s", e)
    exponents = set(cfg.a_exponents or []) | set(cfg.b_exponents or [])
    if len(exponents) == 1:
        ratio = power(xi, exponents.pop())
        collision = digit_collision(t, t_prime, s, ratio)
        summary.update(digit_sum_size=collision.sum_size, digit_bound=collision.bound)
        summary["digit_sum_dimension"] = lattice_sum_dimension(t, t_prime, s, ratio)
    return Outcome(["k", "delta", "count", "log_count"], _series_rows(series), summary)


def run_project(cfg: ExperimentConfig) -> Outcome:
    ifs = planar_system(cfg)
    oriented = remove_reflections(ifs, cfg.orient_depth)
    density = dense_rotation_check(oriented.system, cfg.q_max, cfg.tol)
    profile = projection_profile(ifs, cfg.xi_steps, cfg.k_min, cfg.k_max, skip_coarse=cfg.skip_coarse,
                                 workers=cfg.workers)
    rows = [[xi, e.value, e.stderr] for xi, e in profile.rows]
    values = profile.values
    gamma = similarity_dimension(ifs.scales)
    summary = {
        "dense": density.verdict.value,
        "oriented_dimension_before": oriented.dimension_before,
        "oriented_dimension_after": oriented.dimension_after,
        "expected": expected_projection_dimension(ifs),
        "min_estimate": float(values.min()),
        "max_estimate": float(values.max()),
        "closed_form_bound": closed_form_bound(cfg.m, cfg.epsilon, 1.0, max(ifs.scales), gamma),
    }
    return Outcome(["xi", "dim_estimate", "stderr"], rows, summary)


def run_render(cfg: ExperimentConfig) -> Outcome:
    if cfg.target == "tower":
        tree, _ = _tree(cfg)
        figure = render_tower_svg(tree)
    elif cfg.target == "planar":
        figure = render_svg(planar_system(cfg), cfg.depth)
    else:
        figure = render_svg((left_system(cfg), right_system(cfg)), cfg.depth)
    summary = {"target": cfg.target, "shapes": figure.shapes, "colored_pairs": figure.colored_pairs}
    return Outcome([], [], summary, figure.svg)


RUNNERS: Dict[Command, Callable[[ExperimentConfig], Outcome]] = {
    Command.RESONANCE: run_resonance,
    Command.DIM: run_dim,
    Command.SUMDIM: run_sumdim,
    Command.MARSTRAND: run_marstrand,
    Command.TOWER: run_tower,
    Command.HOMOGENIZE: run_homogenize,
    Command.DROP: run_drop,
    Command.PROJECT: run_project,
    Command.RENDER: run_render,
}


def run(cfg: ExperimentConfig) -> Outcome:
    logger.info("running %s", cfg.command.value)
    with budgets(cfg):
        return RUNNERS[cfg.command](cfg)


def plan(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Work sizes of a run, computed without running it."""
    with budgets(cfg):
        return _plan(cfg)


def _plan(cfg: ExperimentConfig) -> Dict[str, Any]:
    command = cfg.command
    sizes: Dict[str, Any] = {"command": command.value}
    if command is Command.RESONANCE:
        sizes["ratio_pairs"] = left_system(cfg).n * right_system(cfg).n
    elif command in (Command.DIM, Command.SUMDIM):
        left = left_system(cfg)
        right = right_system(cfg) if command is Command.SUMDIM else None
        delta = ladder_delta(_base(cfg) or scale_ladder(left, right), cfg.k_max)
        sizes["scales"] = len(_ks(cfg))
        sizes["cells"] = cylinder_count(left, delta)
        if right is not None:
            sizes["cells_prime"] = cylinder_count(right, delta)
            sizes["pairs"] = sizes["cells"] * sizes["cells_prime"]
    elif command in (Command.MARSTRAND, Command.TOWER):
        left, right = left_system(cfg), right_system(cfg)
        depth = cfg.k if command is Command.MARSTRAND else cfg.m
        cells = left.n ** depth * right.n ** companion_depth(abs(left.ratios[0]), abs(right.ratios[0]), depth)
        sizes["cells"] = cells
        sizes["angles"] = cfg.theta_steps if command is Command.MARSTRAND else (cfg.scale_steps or settings.THETA_STEPS)
        if command is Command.TOWER:
            sizes["levels"] = cfg.levels
            sizes["max_nodes"] = cells ** cfg.levels
    elif command is Command.HOMOGENIZE:
        sizes["N_k"] = homogenize_report(left_system(cfg), cfg.walk).N_k
    elif command is Command.DROP:
        xi, t, t_prime = _drop_inputs(cfg)
        inst = drop_instance(xi, cfg.a_exponents or [], cfg.b_exponents or [], t, t_prime)
        left = resonant_system(xi, cfg.a_exponents or [], t)
        right = resonant_system(xi, cfg.b_exponents or [], t_prime)
        delta = ladder_delta(_base(cfg) or 1 / xi, cfg.k_max)
        sizes.update(M=inst.M, pairs=cylinder_count(left, delta) * cylinder_count(right, delta))
    elif command is Command.PROJECT:
        ifs = planar_system(cfg)
        delta = ifs.radius * profile_scale_base(ifs) ** -cfg.k_max
        sizes["balls"] = ball_count(tuple(ifs.scales), ifs.radius, delta)
        sizes["directions"] = len(direction_grid(cfg.xi_steps))
    else:
        sizes["target"] = cfg.target
        sizes["depth"] = cfg.depth
    return sizes
