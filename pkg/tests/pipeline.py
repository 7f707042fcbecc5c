"""Run the full command-line pipeline into a directory."""
from mdera_ccuc.cli import main


def run(*argv) -> None:
    code = main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"mdera-ccuc {' '.join(map(str, argv))} exited with {code}")


def full_pipeline(out, case="toy", eps=(0.05,), scenarios=50, days=7, seed=0, method="extensive", gap=1e-4):
    common = ["--case", case, "--out", out, "--seed", seed]
    eps_args = ["--eps", *eps]
    run("datagen", *common, "--days", days)
    run("fit", *common)
    for mode in ("c1", "c2"):
        run("solve", *common, "--mode", mode, "--gap", gap)
        run("simulate", *common, "--mode", mode)
    run("solve", *common, "--mode", "c3", *eps_args, "--scenarios", scenarios, "--method", method, "--gap", gap)
    run("simulate", *common, "--mode", "c3", *eps_args)
    run("report", *common, *eps_args)
