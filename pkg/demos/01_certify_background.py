"""Pick a background field and check that it is badly approximable.

The sharp decay rates only hold when |b.k| |k|^r stays bounded below over the
integer lattice.  This script estimates that lower bound for the catalog
vectors on growing balls, shows that a rational direction fails, and checks
the resulting Poincare-type inequality on random fields.
"""

import numpy as np

from mhdlab.diophantine import candidate_fields, certification_table, certify, estimate_constant, poincare_check, poincare_constant
from mhdlab.spectral import make_lattice, random_field


def main():
    for bf in candidate_fields(2):
        print(f"{bf.name} = {bf.vector}, r = {bf.r}")
        for row in certification_table(bf.vector, bf.r, [16, 64, 256, 1024]):
            drop = "" if row["rel_drop"] is None else f"  change {row['rel_drop']:.1e}"
            print(f"  K = {row['K']:5d}  c_est = {row['c_est']:.12f}  argmin {row['argmin_k']}{drop}")

    c, k = estimate_constant((1.0, 1.0), 1.1, 64)
    print(f"rational direction (1, 1): c_est = {c}, resonant mode {k}")

    lat = make_lattice(2, 128)
    bf = certify(candidate_fields(2)[0], 256)
    c_ball, kstar = poincare_constant(lat, bf, 0.0)
    ratios = [poincare_check(random_field(lat, seed, 2.0, 1.0), bf, 0.0)[2] for seed in range(20)]
    print(f"Poincare constant on N=128: {c_ball:.6f} (attained at {kstar});"
          f" random fields reach at most {max(ratios) / c_ball:.3f} of it")


if __name__ == "__main__":
    main()
