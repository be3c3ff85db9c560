"""Evaluate the norm on three small group structures.

Prints the value, the duality gap, the latent decomposition and the strong
and weak group-supports, and compares each value with its closed form.

    python demos/norm_tour.py
"""
import numpy as np

from lglasso import build_group_set, group_support, is_decomposition_unique, omega, omega_oracle

CASES = [
    ("two_overlapping", build_group_set(3, [{1, 2}, {2, 3}]), [1.0, 0.0, 1.0]),
    ("cycle3", build_group_set(3, [{1, 2}, {1, 3}, {2, 3}]), [1.0, 1.0, 1.0]),
    ("cycle3", build_group_set(3, [{1, 2}, {1, 3}, {2, 3}]), [2.0, 1.0, 1.0]),
    ("cycle4", build_group_set(4, [{1, 2}, {1, 3}, {2, 4}, {3, 4}]), [1.0, 2.0, 3.0, 4.0]),
]


def show(name, gs, w):
    w = np.asarray(w)
    res = omega(w, gs)
    sup = group_support(res, gs)
    print(f"{name}  w = {w}")
    print(f"  value {res.value:.9f}  closed form {omega_oracle(w, name):.9f}  gap {res.gap:.1e}")
    for g in range(gs.m):
        if np.any(res.decomposition[g]):
            print(f"  v^{gs.groups[g]} = {np.round(res.decomposition[g], 6)}")
    strong = [gs.groups[g] for g in sorted(sup.strong)]
    weak = [gs.groups[g] for g in sorted(sup.weak)]
    print(f"  strong {strong}")
    print(f"  weak   {weak}")
    unique = is_decomposition_unique(set(np.flatnonzero(w) + 1), sup.strong, gs)
    print(f"  unique decomposition: {unique}\n")


if __name__ == "__main__":
    for case in CASES:
        show(*case)
