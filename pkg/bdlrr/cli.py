#!/usr/bin/env python3
"""
bdlrr command-line interface.

Subcommands: synth, train, predict, oos, rpca, lrr, eval, sweep.
Every subcommand is declared once as a pydantic input model; the argparse
flags are generated from the model fields and the parsed values are
validated by the model before the command runs.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from bdlrr.baselines import lrr_solve, rpca_solve
from bdlrr.classifier import DEFAULT_GAMMA, fit_ridge, load_model, one_hot, predict, save_model
from bdlrr.data import (
    GeneratorConfig,
    accuracy,
    load_dataset,
    load_matrix,
    normalize_columns,
    save_dataset,
    save_labels,
    save_matrix,
    synth_union_of_subspaces,
)
from bdlrr.errors import BdlrrError, UndefinedRatioError
from bdlrr.experiment import (
    PARAMETER_GRID,
    cross_validate,
    run_experiment,
    sweep_parameters,
    write_report,
)
from bdlrr.out_of_sample import OosConfig, oos_predict_batch
from bdlrr.solver import SolverConfig, solve
from bdlrr.structure import off_block_mass_ratio

logger = logging.getLogger(__name__)


# ---------- Command Registry System ----------

COMMANDS: dict[str, dict[str, Any]] = {}


def command(*, name: str, description: str, input_model: type[BaseModel]):
    """
    Decorator to register a function as a CLI subcommand.

    The wrapped function receives the validated input model and returns a
    one-line summary that is printed on success.

    Args:
        name: Subcommand name
        description: Help text for the subcommand
        input_model: Pydantic model whose fields become the flags

    Returns:
        Decorated function
    """
    def deco(fn: Callable[[Any], str]):
        COMMANDS[name] = {
            "name": name,
            "description": description,
            "model": input_model,
            "fn": fn,
        }
        return fn
    return deco


def flag_name(field_name: str) -> str:
    return "--" + field_name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argparse parser from the registered commands.

    Flags are added with ``default=SUPPRESS`` so that only values the user
    actually passed reach the model; everything else takes the model default.
    """
    parser = argparse.ArgumentParser(
        prog="bdlrr", description="Block-diagonal low-rank representation learning"
    )
    parser.add_argument("--verbose", action="store_true", help="Enable verbose debug output")
    sub = parser.add_subparsers(dest="command", required=True)
    for c in COMMANDS.values():
        p = sub.add_parser(c["name"], help=c["description"], description=c["description"])
        for field_name, info in c["model"].model_fields.items():
            help_text = info.description or ""
            if not info.is_required():
                help_text += f" (default: {info.default})"
            p.add_argument(
                flag_name(field_name),
                dest=field_name,
                required=info.is_required(),
                default=argparse.SUPPRESS,
                help=help_text,
            )
    return parser


def execute_command(name: str, raw: dict[str, Any]) -> int:
    """
    Validate raw flag values and run a registered command.

    Returns:
        Process exit code: 0 on success, 2 on invalid input, 1 on failure
    """
    c = COMMANDS.get(name)
    if not c:
        print(f"Unknown command: {name}", file=sys.stderr)
        return 2

    try:
        params = c["model"].model_validate(raw)
    except ValidationError as e:
        print(f"Invalid input for {name}: {e}", file=sys.stderr)
        return 2

    try:
        summary = c["fn"](params)
    except ValidationError as e:
        print(f"Invalid input for {name}: {e}", file=sys.stderr)
        return 2
    except (BdlrrError, OSError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    if summary:
        print(summary)
    return 0


def echo_lines(params: BaseModel) -> list[str]:
    """Fully resolved parameters as key=value lines."""
    return [f"{key}={value}" for key, value in params.model_dump(mode="json").items()]


def _write_kv(path: Path, pairs: dict[str, Any], params: BaseModel) -> None:
    lines = [f"{key}={value}" for key, value in pairs.items()] + echo_lines(params)
    path.write_text("\n".join(lines) + "\n")


# ---------- Pydantic Input Models ----------


class _Input(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SolverFlags(_Input):
    lambda1: float = Field(default=5.0, ge=0, description="Off-block-diagonal penalty weight")
    lambda2: float = Field(default=0.5, ge=0, description="Distance-weighted L1 penalty weight")
    lambda3: float = Field(default=15.0, gt=0, description="L21 noise penalty weight")
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0, description="Ridge classifier penalty")
    rho: float = Field(default=1.15, gt=1, description="Penalty growth factor")
    mu0: float = Field(default=0.1, gt=0, description="Initial penalty")
    mu_max: float = Field(default=1e8, gt=0, description="Penalty cap")
    tol: float = Field(default=1e-6, gt=0, description="Convergence tolerance")
    max_iter: int = Field(default=500, ge=1, description="Iteration cap")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            rho=self.rho,
            mu0=self.mu0,
            mu_max=self.mu_max,
            tol=self.tol,
            max_iter=self.max_iter,
        )


class GeneratorFlags(_Input):
    classes: int = Field(default=5, description="Number of classes")
    subspace_dim: int = Field(default=10, description="Dimension of each class subspace")
    ambient: int = Field(default=50, description="Ambient dimension")
    train: int = Field(default=20, description="Training samples per class")
    test: int = Field(default=20, description="Test samples per class")
    noise: float = Field(default=0.05, description="Gaussian noise standard deviation")

    def generator_config(self, seed: int) -> GeneratorConfig:
        return GeneratorConfig(
            classes=self.classes,
            subspace_dim=self.subspace_dim,
            ambient_dim=self.ambient,
            n_train_per_class=self.train,
            n_test_per_class=self.test,
            noise_std=self.noise,
            seed=seed,
        )


class SynthInput(GeneratorFlags):
    seed: int = Field(default=7, ge=0, description="Random seed")
    out: Path = Field(description="Output dataset directory")


class TrainInput(SolverFlags):
    data: Path = Field(description="Dataset directory (X_tr.txt, X_tt.txt, label files)")
    out: Path = Field(description="Output directory for model, Z, E, history and metrics")


class PredictInput(_Input):
    model: Path = Field(description="Model directory written by train")
    representation: Path = Field(description="Matrix file with test representations Z_tt")
    out: Path | None = Field(default=None, description="Label output file (stdout if omitted)")


class OosInput(_Input):
    model: Path = Field(description="Model directory written by train")
    data: Path = Field(description="Dataset directory the model was trained on")
    instances: Path = Field(description="Matrix file with one new instance per column")
    out: Path | None = Field(default=None, description="Label output file (stdout if omitted)")
    max_iter: int = Field(default=300, ge=1, description="Proximal-gradient iteration cap")
    step_tol: float = Field(default=1e-8, ge=0, description="Stopping tolerance on the iterate change")
    step_rule: Literal["frobenius", "spectral"] = Field(default="frobenius", description="Step-size rule")
    workers: int = Field(default=1, ge=1, description="Parallel solver threads")


class RpcaInput(_Input):
    matrix: Path = Field(description="Input matrix file")
    lam: float | None = Field(default=None, gt=0, description="Sparse weight (1/sqrt(max(d,n)) if omitted)")
    tol: float = Field(default=1e-7, gt=0, description="Tolerance on the relative residual and the scaled E change")
    max_iter: int = Field(default=1000, ge=1, description="Iteration cap")
    out: Path = Field(description="Output directory for X0, E and history")


class LrrInput(_Input):
    matrix: Path = Field(description="Input matrix file")
    dictionary: Path | None = Field(default=None, description="Dictionary matrix file (input matrix if omitted)")
    lam: float = Field(default=15.0, gt=0, description="L21 noise weight")
    tol: float = Field(default=1e-6, gt=0, description="Convergence tolerance")
    max_iter: int = Field(default=500, ge=1, description="Iteration cap")
    out: Path = Field(description="Output directory for Z, E and history")


class EvalInput(SolverFlags, GeneratorFlags):
    data: Path | None = Field(default=None, description="Dataset directory to resplit (synthetic data if omitted)")
    repeats: int = Field(default=10, ge=1, description="Number of trials")
    base_seed: int = Field(default=0, ge=0, description="Seed of trial 0; trial t uses base_seed + t")
    method: Literal["bdlrr", "lrr"] = Field(default="bdlrr", description="Representation learner")
    workers: int = Field(default=1, ge=1, description="Parallel trial processes")
    out: Path = Field(description="Report file")


class SweepInput(SolverFlags, GeneratorFlags):
    data: Path | None = Field(default=None, description="Dataset directory (synthetic data if omitted)")
    lambda1_grid: tuple[float, ...] = Field(default=PARAMETER_GRID, description="Comma-separated lambda1 values")
    lambda2_grid: tuple[float, ...] = Field(default=PARAMETER_GRID, description="Comma-separated lambda2 values")
    folds: int = Field(default=0, ge=0, description="Cross-validation folds on the training data (0: score on test split)")
    repeats: int = Field(default=1, ge=1, description="Trials per grid point when folds is 0")
    base_seed: int = Field(default=0, ge=0, description="Seed of trial 0 and of the dataset generated for --folds")
    out: Path = Field(description="Sweep CSV file")

    @field_validator("lambda1_grid", "lambda2_grid", mode="before")
    @classmethod
    def parse_grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(",") if v.strip())
        return value


# ---------- Command Implementations ----------


@command(
    name="synth",
    description="Generate a synthetic union-of-subspaces dataset.",
    input_model=SynthInput,
)
def cmd_synth(params: SynthInput) -> str:
    generated = synth_union_of_subspaces(params.generator_config(params.seed))
    save_dataset(generated.dataset, params.out, manifest=params.model_dump(mode="json"))
    ds = generated.dataset
    return f"wrote {ds.X_tr.shape[1]} training and {ds.X_tt.shape[1]} test samples to {params.out}"


@command(
    name="train",
    description="Learn the joint representation, fit the classifier and score the test split.",
    input_model=TrainInput,
)
def cmd_train(params: TrainInput) -> str:
    dataset = load_dataset(params.data)
    config = params.solver_config()
    result = solve(dataset.X_tr, dataset.X, dataset.partition, config)
    model = fit_ridge(
        result.z_train,
        one_hot(dataset.train_labels, dataset.n_classes),
        params.gamma,
        partition=dataset.partition,
        solver_params={"lambda1": config.lambda1, "lambda2": config.lambda2, "lambda3": config.lambda3},
    )
    predictions = predict(model, result.z_test)
    acc = accuracy(predictions, dataset.test_labels)
    try:
        ratio = off_block_mass_ratio(result.z_train, dataset.partition)
    except UndefinedRatioError:
        ratio = float("nan")

    out = params.out
    save_model(model, out)
    save_matrix(result.Z, out / "Z.txt")
    save_matrix(result.E, out / "E.txt")
    result.history.to_csv(out / "history.csv")
    save_labels(predictions, out / "predictions.txt")
    _write_kv(
        out / "metrics.txt",
        {
            "accuracy": repr(acc),
            "converged": str(result.converged).lower(),
            "iterations": result.iterations,
            "objective": repr(result.objective),
            "relative_error": repr(result.history[-1].relative_error),
            "off_block_ratio": repr(ratio),
        },
        params,
    )
    flag = "" if result.converged else " (not converged)"
    return f"accuracy={acc:.4f} after {result.iterations} iterations{flag}"


@command(
    name="predict",
    description="Label test representations with a trained classifier.",
    input_model=PredictInput,
)
def cmd_predict(params: PredictInput) -> str:
    model = load_model(params.model)
    labels = predict(model, load_matrix(params.representation))
    return _emit_labels(labels, params.out)


@command(
    name="oos",
    description="Label new instances through the out-of-sample solver.",
    input_model=OosInput,
)
def cmd_oos(params: OosInput) -> str:
    model = load_model(params.model)
    dataset = load_dataset(params.data)
    known = {k: v for k, v in model.solver_params.items() if k in ("lambda1", "lambda2", "lambda3")}
    config = OosConfig.from_solver_config(
        SolverConfig(**known),
        max_iter=params.max_iter,
        step_tol=params.step_tol,
        step_rule=params.step_rule,
    )
    instances, _ = normalize_columns(load_matrix(params.instances))
    labels = oos_predict_batch(instances, dataset.X_tr, model, config, workers=params.workers)
    return _emit_labels(labels, params.out)


def _emit_labels(labels: np.ndarray, out: Path | None) -> str:
    if out is None:
        return "\n".join(str(int(v)) for v in labels)
    save_labels(labels, out)
    return f"wrote {len(labels)} labels to {out}"


@command(
    name="rpca",
    description="Robust PCA decomposition X = X0 + E.",
    input_model=RpcaInput,
)
def cmd_rpca(params: RpcaInput) -> str:
    result = rpca_solve(load_matrix(params.matrix), params.lam, params.tol, params.max_iter)
    _write_baseline(params.out, "X0.txt", result, params)
    return f"rpca: {len(result.history)} iterations, converged={str(result.converged).lower()}"


@command(
    name="lrr",
    description="Low-rank representation X = D Z + E.",
    input_model=LrrInput,
)
def cmd_lrr(params: LrrInput) -> str:
    X = load_matrix(params.matrix)
    dictionary = load_matrix(params.dictionary) if params.dictionary else None
    result = lrr_solve(X, dictionary, params.lam, params.tol, params.max_iter)
    _write_baseline(params.out, "Z.txt", result, params)
    return f"lrr: {len(result.history)} iterations, converged={str(result.converged).lower()}"


def _write_baseline(out: Path, name: str, result, params: BaseModel) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(result.recovered, out / name)
    save_matrix(result.E, out / "E.txt")
    result.history.to_csv(out / "history.csv")
    _write_kv(
        out / "summary.txt",
        {"converged": str(result.converged).lower(), "iterations": len(result.history)},
        params,
    )


@command(
    name="eval",
    description="Repeat train/test trials and report mean and std accuracy.",
    input_model=EvalInput,
)
def cmd_eval(params: EvalInput) -> str:
    source = load_dataset(params.data) if params.data else params.generator_config(params.base_seed)
    report = run_experiment(
        source,
        params.solver_config(),
        params.gamma,
        params.repeats,
        params.base_seed,
        method=params.method,
        workers=params.workers,
    )
    write_report(report, params.out, extra=dict(line.split("=", 1) for line in echo_lines(params)))
    return (
        f"mean_accuracy={report.mean_accuracy:.4f} std_accuracy={report.std_accuracy:.4f} "
        f"flagged_nonconverged={report.flagged_nonconverged}"
    )


@command(
    name="sweep",
    description="Accuracy over a lambda1 x lambda2 grid (test split or k-fold cross validation).",
    input_model=SweepInput,
)
def cmd_sweep(params: SweepInput) -> str:
    config = params.solver_config()
    if params.folds:
        dataset = (
            load_dataset(params.data)
            if params.data
            else synth_union_of_subspaces(params.generator_config(params.base_seed)).dataset
        )
        result = cross_validate(
            dataset, config, params.gamma, params.lambda1_grid, params.lambda2_grid,
            folds=params.folds, seed=params.base_seed,
        )
    else:
        source = load_dataset(params.data) if params.data else params.generator_config(params.base_seed)
        result = sweep_parameters(
            source, config, params.gamma, params.lambda1_grid, params.lambda2_grid,
            repeats=params.repeats, base_seed=params.base_seed,
        )
    result.to_csv(params.out)
    l1, l2 = result.best()
    return f"best lambda1={l1} lambda2={l2}"


def main(argv: list[str] | None = None) -> int:
    """Entry point for the bdlrr command line."""
    parser = build_parser()
    args = vars(parser.parse_args(argv))

    logging.basicConfig(
        level=logging.DEBUG if args.pop("verbose") else logging.WARNING,
        format="[%(levelname)s] %(message)s",
    )

    name = args.pop("command")
    return execute_command(name, args)


if __name__ == "__main__":
    sys.exit(main())
