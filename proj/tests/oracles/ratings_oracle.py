"""Reference values for the bundled ratings fixture.

generate: writes the synthetic ratings CSV (seeded, run once).
oracle:   computes alpha/kappa/rho with third-party implementations
          (krippendorff, scikit-learn, scipy) and writes them as JSON.
"""
import argparse
import csv
import itertools
import json
import random

DIMENSIONS = ["Technical Correctness", "Fidelity to CTI", "Scope Calibration"]
RATERS = ["rater-a", "rater-b", "rater-c"]


def generate(path, seed=7, items=12):
    rng = random.Random(seed)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dimension", "item", "rater", "score"])
        for d, dimension in enumerate(DIMENSIONS):
            for i in range(items):
                truth = rng.randint(2, 5)
                for r, rater in enumerate(RATERS):
                    if r == 2 and (i + d) % 5 == 4:
                        continue  # rater-c skipped a few rules
                    noise = rng.choice([-1, 0, 0, 0, 1]) if r else rng.choice([0, 0, 1, -1])
                    w.writerow([dimension, f"rule-{i + 1:02d}", rater, min(5, max(1, truth + noise))])


def load(path):
    table = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            cells = table.setdefault(row["dimension"], {})
            cells.setdefault(row["item"], {})[row["rater"]] = int(row["score"])
    return table


def oracle(path, scale_max):
    import krippendorff
    import numpy as np
    from scipy.stats import spearmanr
    from sklearn.metrics import cohen_kappa_score

    rows = []
    for dimension, cells in load(path).items():
        items = list(cells)
        raters = sorted({r for scores in cells.values() for r in scores})
        matrix = np.array([[cells[i].get(r, np.nan) for i in items] for r in raters], dtype=float)
        alpha = {
            level: krippendorff.alpha(reliability_data=matrix, level_of_measurement=level,
                                      value_domain=list(range(1, scale_max + 1)))
            for level in ("nominal", "ordinal", "interval")
        }
        kappa, rho = {}, []
        for name, weights in (("Unweighted", None), ("Linear", "linear"), ("Quadratic", "quadratic")):
            values = []
            for a, b in itertools.combinations(range(len(raters)), 2):
                both = ~np.isnan(matrix[a]) & ~np.isnan(matrix[b])
                values.append(cohen_kappa_score(matrix[a][both], matrix[b][both],
                                                labels=list(range(1, scale_max + 1)), weights=weights))
            kappa[name] = float(np.mean(values))
        for a, b in itertools.combinations(range(len(raters)), 2):
            both = ~np.isnan(matrix[a]) & ~np.isnan(matrix[b])
            rho.append(spearmanr(matrix[a][both], matrix[b][both]).statistic)
        rows.append({"Dimension": dimension, "alpha": {k: float(v) for k, v in alpha.items()},
                     "kappa": kappa, "rho": float(np.mean(rho))})
    return {"scale_max": scale_max, "rows": rows}


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("command", choices=["generate", "oracle"])
    p.add_argument("csv")
    p.add_argument("--out")
    p.add_argument("--scale-max", type=int, default=5)
    args = p.parse_args()
    if args.command == "generate":
        generate(args.csv)
    else:
        text = json.dumps(oracle(args.csv, args.scale_max), indent=2) + "\n"
        if args.out:
            open(args.out, "w").write(text)
        else:
            print(text, end="")
