"""
Usage: gcal.py COMMAND [--config=PATH] [(--data=PATH | --dgp=KIND)] [--seed=SEED] [--workers=K] [--out=PATH] [-v | -vv]
       gcal.py COMMAND [OPTIONS] [--eta=ETA] [--alpha=ALPHA] [--B=B] [--n=N] [--reps=REPS] [--tau=TAU]

Fit, sample and calibrate Gibbs posteriors, and run coverage studies:
       gcal.py <COMMAND> [CONFIG] [DATA] [OVERRIDES]

Arguments:
  COMMAND  what to compute:
    fit        the empirical risk minimizer theta_hat
    sample     draws from the Gibbs posterior at --eta, with a credible region
    calibrate  the learning rate chosen by bootstrap coverage calibration
    simulate   a Monte Carlo coverage study on a data-generating process
    curve      Monte Carlo coverage against eta, for each sample size
    diagnose   sandwich matrices, oracle learning rate and large-sample checks

Options:
  The run is described by a JSON config file, by flags, or by both (flags win):
    -c PATH --config=PATH      a JSON run configuration
    -d PATH --data=PATH        a CSV dataset (see the config's "dataset" section)
    -g KIND --dgp=KIND         a built-in data-generating process instead of data
    -s SEED --seed=SEED        the root seed, an unsigned 64-bit integer
    -w K --workers=K           worker processes (default: $GIBBSCAL_WORKERS, or 1)
    -o PATH --out=PATH         write the result envelope here (default: stdout)

  Overrides:
    --eta --alpha --B --n --reps --tau

  Level of detail logged:
    -v -vv                     INFO, DEBUG

Exit codes:
  0 success, 2 usage error, 3 data or config error, 4 numerical failure

Examples:
  gcal.py calibrate --dgp quantile-regression --n 50 --B 200 --seed 1
    Calibrate the learning rate on one simulated quantile-regression sample.

  gcal.py simulate -c study.json -w 8 -o study.json.out
    Run the coverage study described by study.json on 8 workers.

"""  # noqa

import argparse
import logging
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np
from tqdm import tqdm

from gibbscal import GibbsModel
from gibbscal.asymptotics import (
    asymptotic_coverage,
    bvm_approx,
    bvm_distance,
    estimate_risk_hessian,
    estimate_score_outer,
    oracle_learning_rate,
    sandwich_cov,
)
from gibbscal.config import RunConfig, emit_config, parse_config
from gibbscal.const import COMMANDS, DGP_KINDS, EXIT_CODE, LABEL_LOSS_KINDS, WORKERS_ENV
from gibbscal.exceptions import (
    ConfigError,
    ContractViolation,
    DataParseError,
    DegeneratePosteriorError,
    DomainError,
    InitializationError,
    SingularHessianError,
    UnsupportedOperation,
)
from gibbscal.io import (
    build_envelope,
    dumps_canonical,
    dumps_line,
    load_dataset_csv,
    write_csv,
    write_envelope,
)
from gibbscal.session import WorkerPool, derive_seed
from gibbscal.simulate import (
    compare_regions,
    consistency_diagnostic,
    coverage_vs_eta_curve,
    gen_dataset,
    run_coverage_study,
)

logging.basicConfig(datefmt="%H:%M:%S", format="%(asctime)s %(levelname)s: %(message)s")
_LOGGER = logging.getLogger(__name__)

DATA_ERRORS = (ConfigError, ContractViolation, DataParseError, UnsupportedOperation, OSError)
NUMERICAL_ERRORS = (
    DomainError,
    InitializationError,
    DegeneratePosteriorError,
    SingularHessianError,
    np.linalg.LinAlgError,
    ArithmeticError,
)


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="gcal.py")
    parser.add_argument("command", choices=COMMANDS)

    group = parser.add_argument_group("run description")
    group.add_argument("-c", "--config", help="a JSON run configuration")
    source = group.add_mutually_exclusive_group()
    source.add_argument("-d", "--data", help="a CSV dataset")
    source.add_argument("-g", "--dgp", choices=DGP_KINDS, help="a built-in process")
    group.add_argument("-s", "--seed", type=int)
    group.add_argument(
        "-w", "--workers", type=int, default=os.environ.get(WORKERS_ENV)
    )
    group.add_argument("-o", "--out", help="where to write the result envelope")

    group = parser.add_argument_group("overrides")
    group.add_argument("--eta", type=float)
    group.add_argument("--alpha", type=float)
    group.add_argument("--B", type=int)
    group.add_argument("--n", type=int)
    group.add_argument("--reps", type=int)
    group.add_argument("--tau", type=float)

    parser.add_argument(
        "-v",
        "--verbosity",
        action="count",
        default=0,
        help="increasing verbosity of the log",
    )
    return parser.parse_args(argv)


def _progress(record) -> None:
    """Write one JSON progress record to standard error."""
    tqdm.write(dumps_line(record), file=sys.stderr)


def _load_data(cfg: RunConfig):
    """Return the dataset and, for simulated data, the process it came from."""
    if cfg.dataset is not None:
        data = load_dataset_csv(
            cfg.dataset.path,
            cfg.dataset.split_index,
            cfg.dataset.header,
            cfg.dataset.classification or cfg.loss.kind in LABEL_LOSS_KINDS,
        )
        return data, None
    dgp = cfg.dgp.build()
    return gen_dataset(dgp, cfg.dgp.n, derive_seed(cfg.seed, "data")), dgp


def _need_dgp(cfg: RunConfig):
    if cfg.dgp is None:
        raise ConfigError(f"the {cfg.command} command needs a 'dgp'", "dgp")
    return cfg.dgp.build()


def run_fit(cfg: RunConfig, pool):
    data, _ = _load_data(cfg)
    model = GibbsModel(cfg.loss, data, cfg.prior)
    return {"estimate": model.fit().to_json(), "n": data.n}, None


def run_sample(cfg: RunConfig, pool):
    data, _ = _load_data(cfg)
    model = GibbsModel(cfg.loss, data, cfg.prior)
    draws = model.sample(cfg.eta, cfg.sampler, cfg.seed)
    region = model.region(draws, cfg.gpc)
    _progress({"command": "sample", "accept_rate": draws.accept_rate})
    payload = {"eta": cfg.eta, "n": data.n, "draws": draws.data, "region": region.to_json()}
    return payload, None


def run_calibrate(cfg: RunConfig, pool):
    data, _ = _load_data(cfg)
    model = GibbsModel(cfg.loss, data, cfg.prior)
    result = model.calibrate(cfg.gpc, cfg.seed, pool=pool, progress=_progress)
    payload = {
        "n": data.n,
        "theta_hat": model.fit().to_json(),
        "calibration": result.to_json(),
    }
    return payload, None


def run_simulate(cfg: RunConfig, pool):
    dgp = _need_dgp(cfg)

    with tqdm(total=cfg.study.reps, desc="replications", file=sys.stderr) as counter:

        def progress(state) -> None:
            counter.update(state["done"] - counter.n)

        result = run_coverage_study(
            dgp,
            cfg.dgp.n,
            cfg.gpc,
            cfg.study.reps,
            cfg.seed,
            calibrate=cfg.study.calibrate,
            pool=pool,
            progress=progress,
        )
    payload = {"dgp": dgp.to_json(), "n": cfg.dgp.n, "study": result.info(verbosity=2)}
    return payload, result.rows()


def run_curve(cfg: RunConfig, pool):
    dgp = _need_dgp(cfg)
    rows = coverage_vs_eta_curve(
        dgp,
        cfg.study.n_list,
        cfg.study.eta_grid,
        cfg.study.reps,
        cfg.seed,
        cfg=cfg.gpc,
        pool=pool,
    )
    for row in rows:
        _progress({"command": "curve", **row})
    return {"dgp": dgp.to_json(), "rows": rows}, rows


def run_diagnose(cfg: RunConfig, pool):
    data, dgp = _load_data(cfg)
    model = GibbsModel(cfg.loss, data, cfg.prior)
    theta_hat = model.fit().theta
    hessian = estimate_risk_hessian(cfg.loss, data, theta_hat, cfg.hessian)
    S = estimate_score_outer(cfg.loss, data, theta_hat)
    sandwich = sandwich_cov(hessian.matrix, S)
    oracle = oracle_learning_rate(sandwich.Sigma, sandwich.V)

    theta_star = theta_hat if dgp is None else dgp.true_theta
    approx = bvm_approx(cfg.eta, theta_hat, theta_star, sandwich.V, data.n)
    draws = model.sample(cfg.eta, cfg.sampler, cfg.seed)
    points = {"theta_hat": theta_hat}
    if dgp is not None:
        points["theta_star"] = dgp.true_theta
    regions = compare_regions(
        draws,
        model.spec(cfg.eta),
        cfg.gpc.alpha,
        cfg.gpc.B,
        derive_seed(cfg.seed, "bootstrap-region"),
        points,
        pool,
    )
    payload = {
        "n": data.n,
        "theta_hat": theta_hat.tolist(),
        "hessian": hessian.to_json(),
        "sandwich": sandwich.to_json(),
        "oracle_eta": oracle,
        "asymptotic_coverage": asymptotic_coverage(
            cfg.eta, sandwich.Sigma, sandwich.V, cfg.gpc.alpha
        ),
        "bvm": {"approx": approx.to_json(), "distance": bvm_distance(draws, approx)},
        "regions": regions,
    }
    _progress({"command": "diagnose", "oracle_eta": oracle})

    tables = {"regions": regions}
    if dgp is not None:
        consistency = consistency_diagnostic(
            dgp,
            cfg.study.n_list,
            cfg.study.eps,
            cfg.eta,
            cfg.study.reps,
            derive_seed(cfg.seed, "consistency"),
            cfg=cfg.gpc,
            pool=pool,
        )
        payload["consistency"] = consistency
        tables["consistency"] = consistency
    return payload, tables


RUNNERS = {
    "fit": run_fit,
    "sample": run_sample,
    "calibrate": run_calibrate,
    "simulate": run_simulate,
    "curve": run_curve,
    "diagnose": run_diagnose,
}


def _side_table_path(out_path, name="") -> str:
    root, _ = os.path.splitext(out_path)
    return f"{root}-{name}.csv" if name else f"{root}.csv"


def cli_dispatch(argv=None) -> int:
    """Run one command and return the process exit code."""
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        return EXIT_CODE.Usage if exc.code else EXIT_CODE.Ok

    if args.verbosity:
        level = logging.INFO if args.verbosity == 1 else logging.DEBUG
        logging.getLogger("gibbscal").setLevel(level)
        _LOGGER.setLevel(level)

    overrides = {
        "command": args.command,
        "data": args.data,
        "dgp_kind": args.dgp,
        "seed": args.seed,
        "workers": args.workers,
        "output_path": args.out,
        "eta": args.eta,
        "alpha": args.alpha,
        "B": args.B,
        "n": args.n,
        "reps": args.reps,
        "tau": args.tau,
    }
    try:
        cfg = parse_config(args.config, overrides)
        _LOGGER.debug("cli_dispatch(): config=%s", emit_config(cfg))

        started = datetime.now(timezone.utc)
        clock = time.perf_counter()
        with WorkerPool(cfg.workers) as pool:
            payload, rows = RUNNERS[cfg.command](cfg, pool)
        payload = {"command": cfg.command, **payload}
        envelope = build_envelope(
            cfg.to_json(), payload, cfg.seed, started, time.perf_counter() - clock
        )

        if cfg.output_path is None:
            sys.stdout.write(dumps_canonical(envelope))
        else:
            write_envelope(cfg.output_path, envelope)
            tables = rows if isinstance(rows, dict) else {"": rows}
            for name, table in tables.items():
                if table:
                    write_csv(_side_table_path(cfg.output_path, name), table)

    except DATA_ERRORS as exc:
        _LOGGER.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CODE.Data
    except NUMERICAL_ERRORS as exc:
        _LOGGER.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CODE.Numerical
    return EXIT_CODE.Ok


if __name__ == "__main__":  # called from CLI?
    sys.exit(cli_dispatch())
