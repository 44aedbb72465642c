"""Batch front-end: data ingestion, key=value configuration, and the
fit / simulate / study / summarize commands.

Exit codes: 0 success, 2 validation failure, 3 all chains failed, 4 I/O
error.  All floats are written with 17 significant digits so that emitted
files re-ingest bit-exactly.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from .core import (
    GaussianPrior,
    ModelConfig,
    MODEL_NAMES,
    PosteriorDraws,
    PriorSpec,
    TrialData,
    VARIANCE_FIELDS,
    validate,
)
from .design import build_designs
from .estimands import summarize
from .gibbs import run_chain
from .rng import RngStream
from .simulate import (
    DEFAULT_STUDY_BURN_IN,
    DEFAULT_STUDY_ITERATIONS,
    DEFAULT_STUDY_REPLICATES,
    SCENARIO_PRESETS,
    SimulationScenario,
    generate_trial,
    run_study,
    true_sace,
    write_aggregate_csv,
    write_replicates_csv,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ALL_CHAINS_FAILED = 3
EXIT_IO = 4

DATA_FIXED_COLUMNS = ("cluster_id", "period", "treatment", "survived", "outcome")

DRAWS_COLUMNS = ("chain", "iteration", "mu_ldiff", "mu_rom",
                 "pi_00", "pi_10", "pi_11") + VARIANCE_FIELDS


class ConfigError(ValueError):
    pass


class SchemaError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return format(x, ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# key=value files


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def write_kv_file(path: Path, items: dict) -> None:
    lines = [f"{k}={_fmt(v)}" for k, v in items.items()]
    path.write_text("\n".join(lines) + "\n")


def _convert(key: str, raw: str, conv):
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}")


def _prior_key_table() -> dict[str, tuple[str, str]]:
    table = {}
    defaults = PriorSpec()
    for f in dataclasses.fields(PriorSpec):
        block = getattr(defaults, f.name)
        if isinstance(block, GaussianPrior):
            table[f"prior_{f.name}_mean"] = (f.name, "mean")
            table[f"prior_{f.name}_var"] = (f.name, "variance")
        else:
            table[f"prior_{f.name}_shape"] = (f.name, "shape")
            table[f"prior_{f.name}_rate"] = (f.name, "rate")
    return table


PRIOR_KEYS = _prior_key_table()

MODEL_CONFIG_KEYS = ("model", "iterations", "burn_in", "thinning", "chains", "seed")


def build_model_config(kv: dict[str, str], model: str | None = None,
                       seed: int | None = None, chains: int | None = None,
                       defaults: dict | None = None) -> ModelConfig:
    """ModelConfig from key=value pairs plus command-line overrides."""
    unknown = sorted(set(kv) - set(MODEL_CONFIG_KEYS) - set(PRIOR_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    prior_kwargs: dict[str, dict] = {}
    for key, (block, field_name) in PRIOR_KEYS.items():
        if key in kv:
            prior_kwargs.setdefault(block, {})[field_name] = _convert(key, kv[key], float)
    priors_fields = {}
    base = PriorSpec()
    for block, overrides in prior_kwargs.items():
        cls = type(getattr(base, block))
        priors_fields[block] = cls(**{**dataclasses.asdict(getattr(base, block)), **overrides})
    priors = dataclasses.replace(base, **priors_fields)

    defaults = defaults or {}
    name = model or kv.get("model") or defaults.get("model", "1")
    if name not in MODEL_NAMES:
        raise ConfigError(f"model must be one of {MODEL_NAMES}, got {name!r}")
    def field(key, fallback, conv=int):
        return _convert(key, kv[key], conv) if key in kv else defaults.get(key, fallback)

    try:
        return ModelConfig.for_model(
            name,
            iterations=field("iterations", 10_000),
            burn_in=field("burn_in", 2_500),
            thinning=field("thinning", 1),
            n_chains=chains if chains is not None else field("chains", 4),
            seed=seed if seed is not None else field("seed", 0),
            priors=priors,
        )
    except ValueError as e:
        raise ConfigError(str(e))


_SCENARIO_SCALARS = {
    "n_clusters": int, "size_lo": int, "size_hi": int,
    "err_var_11": float, "err_var_10": float,
    "bpc": float, "wpc": float, "icc": float,
    "strata_bpc": float, "strata_wpc": float, "seed": int,
}
_SCENARIO_LISTS = {
    "cov_means": float, "cov_sds": float,
    "z_coef": float, "w_coef": float,
    "y11_active": float, "y11_control": float, "y10_active": float,
    "covariate_names": str,
}


def build_scenario(kv: dict[str, str], seed: int | None = None) -> SimulationScenario:
    unknown = sorted(set(kv) - set(_SCENARIO_SCALARS) - set(_SCENARIO_LISTS) - {"preset"})
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    preset = kv.get("preset")
    if preset is not None:
        if preset not in SCENARIO_PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {sorted(SCENARIO_PRESETS)}")
        base = SCENARIO_PRESETS[preset]
    else:
        base = SimulationScenario()
    kwargs = {}
    for key, conv in _SCENARIO_SCALARS.items():
        if key in kv:
            kwargs[key] = _convert(key, kv[key], conv)
    for key, conv in _SCENARIO_LISTS.items():
        if key in kv:
            kwargs[key] = tuple(_convert(key, part.strip(), conv)
                                for part in kv[key].split(","))
    if seed is not None:
        kwargs["seed"] = seed
    try:
        return dataclasses.replace(base, **kwargs)
    except ValueError as e:
        raise ConfigError(str(e))


# ---------------------------------------------------------------------------
# trial CSV


def read_trial_csv(path: Path) -> TrialData:
    """Parse the trial schema; schema violations are reported with line numbers."""
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError([f"{path}: empty file"])
        if tuple(header[:5]) != DATA_FIXED_COLUMNS:
            raise SchemaError(
                [f"{path}:1: header must start with {','.join(DATA_FIXED_COLUMNS)}"])
        cov_names = tuple(header[5:])
        width = len(header)
        cluster, period, treatment, survived, ylog = [], [], [], [], []
        covs = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                problems.append(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
                continue
            try:
                cl = int(row[0])
                per = int(row[1])
                trt = int(row[2])
                sur = int(row[3])
            except ValueError:
                problems.append(f"{path}:{lineno}: non-integer id/indicator field")
                continue
            out_cell = row[4].strip()
            if sur == 1:
                if not out_cell:
                    problems.append(f"{path}:{lineno}: outcome missing for survivor")
                    continue
                try:
                    y = float(out_cell)
                except ValueError:
                    problems.append(f"{path}:{lineno}: outcome not a number")
                    continue
                if not (y > 0 and math.isfinite(y)):
                    problems.append(f"{path}:{lineno}: outcome must be positive and finite")
                    continue
                yl = math.log(y)
            else:
                if out_cell:
                    problems.append(f"{path}:{lineno}: outcome present for non-survivor")
                    continue
                yl = float("nan")
            try:
                x = [float(c) for c in row[5:]]
            except ValueError:
                problems.append(f"{path}:{lineno}: non-numeric covariate")
                continue
            cluster.append(cl)
            period.append(per)
            treatment.append(trt)
            survived.append(sur)
            ylog.append(yl)
            covs.append(x)
        if problems:
            raise SchemaError(problems)
        if not cluster:
            raise SchemaError([f"{path}: no data rows"])
    data = TrialData(
        cluster_id=np.array(cluster), period=np.array(period),
        treatment=np.array(treatment), survived=np.array(survived),
        log_outcome=np.array(ylog), covariates=np.array(covs, dtype=np.float64),
        covariate_names=cov_names, n_clusters=int(max(cluster)),
        n_periods=int(max(period)),
    )
    return data


def write_trial_csv(path: Path, data: TrialData) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATA_FIXED_COLUMNS + data.covariate_names)
        for i in range(data.n_individuals):
            out_cell = ""
            if data.survived[i] == 1:
                out_cell = format(math.exp(data.log_outcome[i]), ".17g")
            writer.writerow([
                int(data.cluster_id[i]), int(data.period[i]),
                int(data.treatment[i]), int(data.survived[i]), out_cell,
                *[format(v, ".17g") for v in data.covariates[i]],
            ])


# ---------------------------------------------------------------------------
# draws CSV


def write_draws_csv(path: Path, draws: PosteriorDraws) -> None:
    props = draws.strata_proportions
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DRAWS_COLUMNS)
        for i in range(draws.n_draws):
            row = [int(draws.chain_id[i]), int(draws.iteration[i]),
                   _fmt(float(draws.mu_ldiff[i])), _fmt(float(draws.mu_rom[i]))]
            row += [format(p, ".17g") for p in props[i]]
            row += [_fmt(float(v)) for v in draws.variances[i]]
            writer.writerow(row)


def read_draws_csv(path: Path) -> PosteriorDraws:
    """Rebuild pooled draws from a draws.csv (strata proportions are carried
    as-is, with a unit denominator)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DRAWS_COLUMNS:
            raise SchemaError([f"{path}:1: not a draws file (unexpected header)"])
        chain, iteration, ldiff, rom, props, variances = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(DRAWS_COLUMNS):
                raise SchemaError([f"{path}:{lineno}: wrong field count"])
            chain.append(int(row[0]))
            iteration.append(int(row[1]))
            ldiff.append(float(row[2]) if row[2] else float("nan"))
            rom.append(float(row[3]) if row[3] else float("nan"))
            props.append([float(c) for c in row[4:7]])
            variances.append([float(c) if c else float("nan") for c in row[7:]])
    return PosteriorDraws(
        chain_id=np.array(chain, dtype=np.int64),
        iteration=np.array(iteration, dtype=np.int64),
        mu_ldiff=np.array(ldiff), mu_rom=np.array(rom),
        strata_counts=np.array(props, dtype=np.float64),
        variances=np.array(variances), n_individuals=1,
    )


# ---------------------------------------------------------------------------
# manifest


def _hash_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path: Path, command: str, *, config_hash: str, data_hash: str,
                   seed: int, chains: int, started: float, failures: list[str],
                   outputs: list[str]) -> None:
    items = {
        "command": command,
        "version": _package_version(),
        "config_hash": config_hash,
        "data_hash": data_hash,
        "seed": seed,
        "chains": chains,
        "started_unix": format(started, ".3f"),
        "finished_unix": format(time.time(), ".3f"),
        "n_failures": len(failures),
    }
    for i, f in enumerate(failures):
        items[f"failure_{i}"] = f.replace("\n", " ")
    items["outputs"] = ";".join(outputs)
    write_kv_file(path, items)


def _package_version() -> str:
    from . import __version__

    return __version__


# ---------------------------------------------------------------------------
# commands


def _fit_one_chain(args):
    data, dm, config, chain_id = args
    rng = RngStream(config.seed, chain_id).generator()
    return run_chain(data, dm, config, chain_id, rng)


def cmd_fit(args) -> int:
    started = time.time()
    data_path = Path(args.data)
    config_text = Path(args.config).read_text() if args.config else ""
    kv = parse_kv_text(config_text, source=str(args.config))
    config = build_model_config(kv, model=args.model, seed=args.seed,
                                chains=args.chains)
    data = read_trial_csv(data_path)
    problems = validate(data)
    if problems:
        raise SchemaError([f"{data_path}: {p}" for p in problems])
    if data.n_periods != 2:
        raise SchemaError([f"{data_path}: estimation requires a two-period trial"])

    dm = build_designs(data)
    jobs = [(data, dm, config, c) for c in range(config.n_chains)]
    if args.threads > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_fit_one_chain, jobs))
    else:
        results = [_fit_one_chain(j) for j in jobs]

    failures = [f"chain {r.chain_id} sweep {r.sweeps_completed}: {r.error}"
                for r in results if not r.ok]
    ok = [r.draws for r in results if r.ok]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if ok:
        draws = PosteriorDraws.pool(ok)
        write_draws_csv(out_dir / "draws.csv", draws)
        summary = summarize(draws)
        write_kv_file(out_dir / "summary.txt", summary.to_flat_dict())
        outputs += ["draws.csv", "summary.txt"]
    write_manifest(out_dir / "manifest.txt", "fit",
                   config_hash=_hash_text(config_text), data_hash=_hash_file(data_path),
                   seed=config.seed, chains=config.n_chains, started=started,
                   failures=failures, outputs=outputs)
    for f in failures:
        print(f"warning: {f}", file=sys.stderr)
    if not ok:
        print("error: all chains failed", file=sys.stderr)
        return EXIT_ALL_CHAINS_FAILED
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    scenario_text = Path(args.scenario).read_text()
    kv = parse_kv_text(scenario_text, source=str(args.scenario))
    scenario = build_scenario(kv, seed=args.seed)

    rng = RngStream(scenario.seed, 0).generator()
    data, _ = generate_trial(scenario, rng)
    truth = true_sace(scenario)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trial_csv(out_dir / "trial.csv", data)
    write_kv_file(out_dir / "truth.txt", truth.to_dict())
    write_manifest(out_dir / "manifest.txt", "simulate",
                   config_hash=_hash_text(scenario_text), data_hash="",
                   seed=scenario.seed, chains=0, started=started,
                   failures=[], outputs=["trial.csv", "truth.txt"])
    return EXIT_OK


def cmd_study(args) -> int:
    started = time.time()
    scenario_text = Path(args.scenario).read_text()
    scenario = build_scenario(parse_kv_text(scenario_text, source=str(args.scenario)))
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        if m not in MODEL_NAMES:
            raise ConfigError(f"unknown model {m!r} in --models")
    config_text = Path(args.config).read_text() if args.config else ""
    kv = parse_kv_text(config_text, source=str(args.config))
    base = build_model_config(
        kv, seed=args.seed, chains=args.chains,
        defaults={"iterations": DEFAULT_STUDY_ITERATIONS,
                  "burn_in": DEFAULT_STUDY_BURN_IN, "chains": 1})

    report = run_study(scenario, models, n_replicates=args.replicates,
                       seed=base.seed, base_config=base,
                       parallelism=args.threads)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_replicates_csv(report, out_dir / "replicates.csv")
    write_aggregate_csv(report, out_dir / "aggregate.csv")
    n_failed = sum(a["n_failed"] for a in report.aggregates)
    write_manifest(out_dir / "manifest.txt", "study",
                   config_hash=_hash_text(scenario_text + "\x00" + config_text),
                   data_hash="", seed=base.seed, chains=base.n_chains,
                   started=started,
                   failures=[f"{n_failed} failed model-replicates"] if n_failed else [],
                   outputs=["replicates.csv", "aggregate.csv"])
    return EXIT_OK


def cmd_summarize(args) -> int:
    draws = read_draws_csv(Path(args.draws))
    summary = summarize(draws)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_kv_file(out_dir / "summary.txt", summary.to_flat_dict())
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crxo-sace",
        description="Survivor average causal effect estimation for two-period "
                    "cluster-randomized crossover trials.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the model to a trial CSV")
    fit.add_argument("data", help="trial CSV (cluster_id,period,treatment,survived,outcome,covariates...)")
    fit.add_argument("--config", default=None, help="key=value model config file")
    fit.add_argument("--model", choices=MODEL_NAMES, default=None)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--chains", type=int, default=None)
    fit.add_argument("--threads", type=int, default=1)
    fit.add_argument("--out-dir", default=".")
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="generate one trial from a scenario file")
    sim.add_argument("scenario", help="key=value scenario file (preset= or explicit fields)")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out-dir", default=".")
    sim.set_defaults(func=cmd_simulate)

    study = sub.add_parser("study", help="replicated bias/RMSE/coverage study")
    study.add_argument("scenario")
    study.add_argument("--models", "--model", dest="models", default="1",
                       help="comma list from {1,2,3,4,A}")
    study.add_argument("--replicates", type=int, default=DEFAULT_STUDY_REPLICATES)
    study.add_argument("--config", default=None, help="chain schedule config file")
    study.add_argument("--seed", type=int, default=None)
    study.add_argument("--chains", type=int, default=None, help="chains per replicate fit")
    study.add_argument("--threads", type=int, default=1)
    study.add_argument("--out-dir", default=".")
    study.set_defaults(func=cmd_study)

    summ = sub.add_parser("summarize", help="re-summarize a saved draws.csv")
    summ.add_argument("draws")
    summ.add_argument("--out-dir", default=".")
    summ.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
