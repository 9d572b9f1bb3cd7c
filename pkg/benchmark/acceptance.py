import argparse
import itertools
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import tabulate
from tqdm import tqdm

from ifsresonance.boxdim import (
    attractor_cover,
    box_count,
    count_series,
    dim_report,
    estimate_dimension,
    ladder_delta,
    random_attractor_points,
)
from ifsresonance.drop import (
    carry_dimension,
    default_translations,
    digit_collision,
    drop_instance,
    essential_pair_bound,
    hit_probability,
    resonant_scale,
    resonant_system,
)
from ifsresonance.homogenize import homogenize_report
from ifsresonance.ifs.systems import central_cantor, conjugate, make_ifs, similarity_dimension
from ifsresonance.marstrand import energy_exponent, good_angle_set, product_cells, select_separated
from ifsresonance.planar import expected_projection_dimension, projection_profile, regular_system
from ifsresonance.settings import settings
from ifsresonance.tower import build_tree


def cantor_dimension(workers=None):
    third = central_cantor("1/3")
    expected = math.log(2) / math.log(3)
    slope = dim_report(third, None, None, 6, 14, workers=workers).value
    simdim = similarity_dimension(third.ratios)
    return slope, abs(slope - expected) <= 0.01 and abs(simdim - expected) <= 1e-12


def homogeneous_drop(workers=None):
    quarter = central_cantor("1/4")
    slope = dim_report(quarter, quarter, Fraction(1), 6, 12, workers=workers).value
    D = [Fraction(0), Fraction(3, 4)]
    bound = digit_collision(D, D, resonant_scale(D, D), Fraction(1, 4)).bound
    expected = math.log(3) / math.log(4)
    return slope, abs(slope - expected) <= 0.02 and 1 - slope >= 0.18 and abs(bound - slope) <= 0.02


def lattice_drop(workers=None):
    slope = dim_report(central_cantor("1/9"), central_cantor("1/3"), Fraction(1), 6, 14, workers=workers).value
    dims = math.log(2) / math.log(9) + math.log(2) / math.log(3)
    # base-9 digit blocks of K_{1/9} + K_{1/3}
    oracle = carry_dimension(sorted({a + b for a in (0, 8) for b in (0, 2, 6, 8)}), 9)
    return slope, slope <= dims - 0.01 and abs(slope - oracle) <= 0.02, {"oracle": oracle}


def irrational_sums(workers=None):
    quarter = central_cantor("1/4")
    fifth_series = count_series(central_cantor("1/5"), list(range(6, 13)), quarter, Fraction(1), Fraction(4), workers)
    third_series = count_series(central_cantor("1/3"), list(range(6, 13)), quarter, Fraction(1), Fraction(4), workers)
    fifth = estimate_dimension(fifth_series).value
    third = estimate_dimension(third_series).value
    expected = math.log(2) / math.log(5) + math.log(2) / math.log(4)
    return fifth, abs(fifth - expected) <= 0.05 and third >= 0.95


def discrete_marstrand(workers=None):
    quarter = central_cantor("1/4")
    family = product_cells(quarter, quarter, 6, sample_constants=False)
    angles = good_angle_set(family, 0.1, 4096, workers=workers)
    exponent, _ = energy_exponent(quarter, quarter, 3, 7)
    return angles.bad_measure, angles.within_bound and abs(exponent - (family.gamma - 1)) <= 0.15


def tower_bound(workers=None):
    quarter, third = central_cantor("1/4"), central_cantor("1/3")
    levels, report = build_tree(quarter, third, 0, 3, 0.1, 8, workers=workers)
    measured = dim_report(quarter, third, Fraction(1), 6, 12, workers=workers).value
    audits = all(all(level.audits.values()) for level in levels)
    weyl = abs(report.weyl_frequency - report.weyl_expected) <= 0.05
    bounded = 0.65 <= report.certified_slope <= measured + 0.02
    return report.certified_slope, audits and weyl and bounded


def homogenization(workers=None):
    halves = make_ifs(["1/2", "1/2"], ["0", "1/2"])
    tau_10 = homogenize_report(halves, 10).tau
    tau_100 = homogenize_report(halves, 100).tau
    return tau_10, abs(tau_10 - math.log(252) / (10 * math.log(2))) <= 1e-12 and tau_100 >= 0.96


def essential_pair(workers=None):
    xi = Fraction(1, 2)
    t, t_prime = default_translations(xi, [1, 2]), default_translations(xi, [1, 1])
    inst = drop_instance(xi, [1, 2], [1, 1], t, t_prime)
    bound = essential_pair_bound(inst)
    left, right = resonant_system(xi, [1, 2], t), resonant_system(xi, [1, 1], t_prime)
    measured = dim_report(left, right, resonant_scale(t, t_prime), 6, 12, base=Fraction(2), workers=workers).value
    half = Fraction(1, 2)
    hits = hit_probability(10, [1, 2], [half, half]) == Fraction(683, 1024)
    return bound, bound < inst.beta + inst.beta_prime and bound >= measured - 0.03 and hits


def planar_profile(workers=None):
    ifs = regular_system(3, 0.3, math.pi * (math.sqrt(5) - 1) / 2)
    values = projection_profile(ifs, 64, 4, 9, workers=workers).values
    expected = expected_projection_dimension(ifs)
    return float(values.min()), values.min() >= expected - 0.05 and values.max() <= 1.03


def _largest_separated(lo, hi, rho):
    n = len(lo)
    for size in range(n, 0, -1):
        for subset in itertools.combinations(sorted(range(n), key=lambda i: lo[i]), size):
            if all(lo[b] - hi[a] > rho for a, b in zip(subset, subset[1:])):
                return size
    return 0


def property_suites(workers=None):
    rng = np.random.default_rng(settings.SEED)
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 16))
        lo = rng.uniform(0, 10, n)
        hi = lo + rng.uniform(0, 3, n)
        rho = float(rng.uniform(0, 1))
        failures += len(select_separated(lo, hi, rho)) != _largest_separated(lo, hi, rho)

    for a in ("1/3", "1/4", "1/5", "1/9"):
        ifs = central_cantor(a)
        cover = attractor_cover(ifs, ladder_delta(1 / ifs.ratios[0], 6))
        points = random_attractor_points(ifs, 1000, 30, seed=settings.SEED)
        failures += sum(not cover.contains_point(x) for x in points)

        scaled = conjugate(ifs, Fraction(1, 3), 0)
        for k in range(2, 7):
            delta = ladder_delta(1 / ifs.ratios[0], k)
            if box_count(attractor_cover(ifs, delta), delta) != box_count(attractor_cover(scaled, delta / 3), delta / 3):
                failures += 1
    return failures, failures == 0


ACCEPTANCE = [
    ("cantor dimension", cantor_dimension),
    ("homogeneous drop", homogeneous_drop),
    ("lattice drop", lattice_drop),
    ("irrational sums", irrational_sums),
    ("discrete marstrand", discrete_marstrand),
    ("tower bound", tower_bound),
    ("homogenization", homogenization),
    ("essential pair", essential_pair),
    ("planar profile", planar_profile),
    ("property suites", property_suites),
]


def main():
    parser = argparse.ArgumentParser(description="Run the acceptance checks and time them.")
    parser.add_argument("--result_path", type=str, help="Folder for results.json, defaults to the results folder", default=None)
    parser.add_argument("--workers", type=int, help="Number of workers to use for parallel processing", default=None)
    parser.add_argument("--only", type=str, nargs="*", help="Names of the checks to run", default=None)
    args = parser.parse_args()

    checks = [(name, func) for name, func in ACCEPTANCE if not args.only or name in args.only]
    results = {}
    for name, func in tqdm(checks, desc="Acceptance"):
        start = time.time()
        value, passed, *extra = func(workers=args.workers)
        results[name] = {"value": float(value), "passed": bool(passed), "time": time.time() - start}
        if extra:
            results[name].update(extra[0])

    print("Acceptance Results")
    headers = ["Check", "Value", "Passed", "Time (s)"]
    table = [(name, round(r["value"], 4), r["passed"], round(r["time"], 2)) for name, r in results.items()]
    print(tabulate.tabulate(table, tablefmt="github", headers=headers))

    result_path = args.result_path
    if result_path is None:
        result_path = settings.RESULTS_FOLDER

    os.makedirs(result_path, exist_ok=True)

    with open(os.path.join(result_path, "results.json"), "w+") as f:
        json.dump(results, f)


if __name__ == "__main__":
    main()
