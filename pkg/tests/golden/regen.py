"""Regenerate the golden CLI outputs: ``python tests/golden/regen.py``.

Only rerun after an intended change in numerical behaviour, and review the diff.
"""

from pathlib import Path

from msnar.cli import main

HERE = Path(__file__).parent

# (name, argv); "{g}" expands to this directory
CASES = [
    ("path.csv", ["simulate", "--model", "{g}/model.json", "--n", "300", "--seed", "7", "--out", "{g}/path.csv"]),
    ("stability.json", ["check-stability", "--model", "{g}/model.json", "--moment", "2", "--out", "{g}/stability.json"]),
    ("loglik.json", ["loglik", "--model", "{g}/model.json", "--data", "{g}/path.csv", "--out", "{g}/loglik.json"]),
    ("forgetting.jsonl", ["forgetting", "--model", "{g}/model.json", "--data", "{g}/path.csv", "--l", "100",
                          "--max-lag", "15", "--out", "{g}/forgetting.jsonl"]),
    ("fit.json", ["fit", "--data", "{g}/path.csv", "--m", "2", "--seed", "3", "--out", "{g}/fit.json"]),
    ("fit_em.json", ["fit", "--data", "{g}/path.csv", "--m", "2", "--method", "em", "--out", "{g}/fit_em.json"]),
    ("null_path.csv", ["simulate", "--model", "{g}/null_model.json", "--n", "400", "--seed", "11",
                       "--hide-regimes", "--out", "{g}/null_path.csv"]),
    ("lrt.json", ["lrt", "--data", "{g}/null_path.csv", "--m", "2", "--out", "{g}/lrt.json"]),
    ("montecarlo.json", ["montecarlo", "--config", "{g}/experiment.json", "--out", "{g}/montecarlo.json",
                         "--csv", "{g}/montecarlo.csv"]),
]


def expand(argv, g):
    return [a.replace("{g}", str(g)) for a in argv]


if __name__ == "__main__":
    for name, argv in CASES:
        status = main(expand(argv, HERE))
        print(f"{name}: exit {status}")
