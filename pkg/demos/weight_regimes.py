"""Which window lengths are selected under different weights.

All windows of length 1 to 20 on 100 covariates; the noiseless response
depends on covariates 5..24 and 90..92.  Along a regularisation path the
script lists the window lengths in the selected decomposition, using the
decomposition that prefers small groups when several are optimal.

    python demos/weight_regimes.py
"""
from lglasso import SynthSpec, WeightScheme, apply_weight_scheme, generate, groups_from_chain_windows_upto, path

SCHEMES = ["uniform", "sqrt_size", "c=0", "c=1", "c=4", "c=6", "quartic_root"]


def main():
    spec = SynthSpec(p=100, layout={"kind": "windows_upto", "kmax": 20},
                     support={"intervals": [[5, 24], [90, 92]]}, n=100, noise=0.0, seed=2024)
    data = generate(spec)
    base = groups_from_chain_windows_upto(100, 20)
    for label in SCHEMES:
        gs = apply_weight_scheme(base, WeightScheme.parse(label))
        res = path(data.X, data.y, "squared", gs, n_points=50, ratio_min=1e-3, fit_intercept=True)
        lengths = set()
        for f in res.fits:
            lengths |= {int(gs.sizes[g]) for g in f.canonical_groups()}
        print(f"{label:>12}: window lengths {sorted(lengths)}")


if __name__ == "__main__":
    main()
