"""Command-line entry point for the subsampling study.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .harness import ConfigError, DataError, ExperimentConfig, load_config, run_experiment
from .vecchia import FitError

log = logging.getLogger("rexsub")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rexsub", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key-value config file with an [experiment] section")
    p.add_argument("--setting", type=int, nargs="+", dest="settings", help="simulation settings 1-8")
    p.add_argument("--method", nargs="+", dest="methods", choices=("random", "lhs", "imspe", "rexsub"))
    p.add_argument("--n", type=int, help="subsample size")
    p.add_argument("--m", type=int, help="Vecchia conditioning-set size")
    p.add_argument("--p", type=float, help="test-set proportion of the training pool")
    p.add_argument("--alpha", type=float, help="prediction-interval level is 1 - alpha")
    p.add_argument("--criterion", choices=("mspe", "interval_score"))
    p.add_argument("--reps", type=int, dest="replicates")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--data", help="CSV of x,y,z rows instead of simulated settings")
    p.add_argument("--header", action="store_const", const=True, dest="has_header",
                   help="the data file has a header row")
    p.add_argument("--log-transform", action="store_const", const=True, dest="log_transform")
    p.add_argument("--N", type=int, help="simulated dataset size (train + validate)")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-cand", type=int, dest="n_cand")
    p.add_argument("--n-repeat", type=int, dest="n_repeat")
    p.add_argument("--workers", type=int, help="parallel replicate processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose") and v is not None}
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        else:
            cfg = ExperimentConfig(**overrides)
        if cfg.out is None:
            raise ConfigError("--out is required")
        table = run_experiment(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except DataError as exc:
        log.error("data error: %s", exc)
        return 2
    except (FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except OSError as exc:
        log.error("%s", exc)
        return 1
    for source, method, metric, mean, se in table.metrics:
        print(f"{source:>5} {method:>7} {metric:>15} {mean:.4f} ({se:.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
