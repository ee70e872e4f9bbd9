#!/usr/bin/env python3
"""
Command-line interface for multimatrix

Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 data outside the
support of the requested law. Errors are printed as one line of JSON.
"""

import json
import logging
import sys
from dataclasses import replace

import click

from multimatrix import Config, __version__, configure_logging
from multimatrix.errors import (
    ConfigError,
    DatasetError,
    DomainError,
    MultimatrixError,
    QuadratureFailure,
    UnsupportedConfiguration,
)
from multimatrix.kernels import KernelSpec
from multimatrix.matcore import BlockStructure
from multimatrix.models import Family, FitConfig, Role, parse_roles
from multimatrix.services import datasets
from multimatrix.services.checks import CheckResult, run_checks
from multimatrix.services.densities import evaluate_replicates
from multimatrix.services.estimation import fit_beta2
from multimatrix.services.sampling import RngStream, sample_family
from multimatrix.transforms import compress, derive, expand

logger = logging.getLogger("multimatrix.cli")

EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3
GRADIENT_TOL = 1e-4


def _fail(command, exc, code):
    logger.error(f"{command} failed ({type(exc).__name__}): {exc}")
    click.echo(json.dumps(datasets.error_payload(command, exc, code)))
    sys.exit(code)


def _parse_rows(text):
    try:
        rows = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise DatasetError(f"--rows must be comma-separated integers, got {text!r}") from None
    return rows


def _kernel_from_flags(kernel, q, r, dim):
    if kernel is None:
        if q is not None or r is not None:
            raise DomainError("--q/--r need --kernel pearson7")
        return None
    if kernel == "normal":
        return KernelSpec.normal(dim)
    return KernelSpec(kernel, dim, q, r)


def _load(data, from_csv):
    if (data is None) == (from_csv is None):
        raise DatasetError("give exactly one of --data or --from-csv")
    return datasets.load_dataset(data) if data else datasets.load_csv_manifest(from_csv)


def _emit(doc, out):
    text = datasets.write_document(doc, out)
    if not out:
        click.echo(text, nl=False)


kernel_options = [
    click.option("--kernel", type=click.Choice(["normal", "pearson7"]), default=None, help="Density generator"),
    click.option("--q", type=float, default=None, help="Pearson VII power"),
    click.option("--r", type=float, default=None, help="Pearson VII scale"),
]


def with_kernel_options(func):
    for option in reversed(kernel_options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="multimatrix")
@click.option("--log-level", default=None, help="Overrides MULTIMATRIX_LOG_LEVEL")
@click.pass_context
def cli(ctx, log_level):
    """Multimatrix variate distributions"""
    try:
        config = Config.from_env()
    except ConfigError as exc:
        _fail(ctx.invoked_subcommand or "multimatrix", exc, EXIT_INPUT)
    if log_level:
        config = replace(config, log_level=log_level.upper())
    configure_logging(config)
    ctx.obj = config


@cli.command()
@click.argument("family")
@click.option("--data", type=click.Path(), default=None, help="Dataset JSON")
@click.option("--from-csv", type=click.Path(), default=None, help="CSV manifest JSON")
@click.option("--params", type=click.Path(), default=None, help="Parameter JSON (a0, a, kernel, location_scale)")
@with_kernel_options
@click.option("--out", type=click.Path(), default=None)
def logpdf(family, data, from_csv, params, kernel, q, r, out):
    """Log-density of every replicate in a dataset"""
    try:
        fam = Family.parse(family)
        dataset = _load(data, from_csv)
        structure = dataset.structure
        fam.check_roles(dataset.roles, structure.k)
        params_file = datasets.load_params(params) if params else datasets.ParamsFile()
        spec = _kernel_from_flags(kernel, q, r, structure.dim) or params_file.kernel_spec(structure)
        if fam.needs_kernel and spec is None:
            raise DatasetError(f"family {fam.value} needs a kernel (--kernel or params file)")
        shape = params_file.shape_params(structure)
        location = params_file.location()
    except (DatasetError, DomainError) as exc:
        _fail("logpdf", exc, EXIT_INPUT)
    except (KeyError, TypeError, ValueError) as exc:
        _fail("logpdf", DatasetError(f"malformed input: {exc}"), EXIT_INPUT)

    try:
        values, total = evaluate_replicates(fam, dataset.replicates, structure, shape, spec, location)
    except (DomainError, QuadratureFailure) as exc:
        _fail("logpdf", exc, EXIT_DOMAIN)

    inputs = {
        "family": fam.value,
        "data": data or from_csv,
        "params": params,
        "kernel": spec.to_json() if spec else None,
        "shape_params": shape.to_dict() if shape else None,
    }
    results = {"values": values, "sum": total, "replicates": len(values)}
    _emit(datasets.build_report("logpdf", inputs, results), out)


@cli.command()
@click.argument("family")
@click.option("--rows", required=True, help="Block row counts n0,n1,...,nk")
@click.option("--cols", type=int, required=True, help="Shared column count m")
@with_kernel_options
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=None, help="Defaults to MULTIMATRIX_SEED")
@click.option("--all-gram", is_flag=True, help="Wishart only: Gram matrices of all k+1 blocks")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def sample(config, family, rows, cols, kernel, q, r, count, seed, all_gram, out):
    """Draw a dataset of derived statistics"""
    seed = config.seed if seed is None else seed
    try:
        fam = Family.parse(family)
        structure = BlockStructure(_parse_rows(rows), cols)
        spec = _kernel_from_flags(kernel, q, r, structure.dim) or KernelSpec.normal(structure.dim)
        roles = None
        if all_gram:
            if fam is not Family.WISHART:
                raise DatasetError("--all-gram only applies to the wishart family")
            roles = (Role.W,) * (structure.k + 1)
        rng = RngStream(seed)
        if count < 1:
            raise DatasetError("--count must be positive")
        if fam is Family.LOCATED_P7:
            raise UnsupportedConfiguration("located-p7 is not sampled; transform pearson7 draws instead")
    except (DatasetError, DomainError, UnsupportedConfiguration) as exc:
        _fail("sample", exc, EXIT_INPUT)

    try:
        samples = sample_family(fam, structure, spec, roles, count, rng)
    except (DomainError, UnsupportedConfiguration) as exc:
        _fail("sample", exc, EXIT_DOMAIN)
    _emit(datasets.dataset_from_samples(samples, {"version": __version__}), out)


@cli.command()
@click.option("--data", type=click.Path(), default=None, help="Dataset JSON with F roles")
@click.option("--from-csv", type=click.Path(), default=None, help="CSV manifest JSON")
@click.option("--init-a0", type=float, default=1.0, show_default=True)
@click.option("--init-a", type=float, default=None, help="Defaults to (m+1)/2")
@click.option("--tol", type=float, default=None, help="Defaults to MULTIMATRIX_FIT_TOLERANCE")
@click.option("--max-iter", type=int, default=None, help="Defaults to MULTIMATRIX_FIT_MAX_ITERATIONS")
@click.option("--restarts", type=int, default=None, help="Defaults to MULTIMATRIX_FIT_RESTARTS")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def fit(config, data, from_csv, init_a0, init_a, tol, max_iter, restarts, out):
    """Maximum likelihood (a0, a) for a beta-II dependent sample"""
    try:
        dataset = _load(data, from_csv)
        m = dataset.structure.cols
        replicates = datasets.gram_replicates(dataset)
        fit_config = FitConfig(
            init_a0=init_a0,
            init_a=init_a,
            max_iterations=config.fit_max_iterations if max_iter is None else max_iter,
            tolerance=config.fit_tolerance if tol is None else tol,
            restarts=config.fit_restarts if restarts is None else restarts,
        )
        fit_config.check(m)
    except (DatasetError, DomainError) as exc:
        _fail("fit", exc, EXIT_INPUT)

    try:
        report = fit_beta2(replicates, m, fit_config)
    except DomainError as exc:
        _fail("fit", exc, EXIT_DOMAIN)

    checks = []
    if report.gradient_norm is not None:
        checks.append(CheckResult.within("gradient-norm", report.gradient_norm, GRADIENT_TOL))
    inputs = {"data": data or from_csv, "m": m, "k": dataset.structure.k, "config": fit_config.to_dict()}
    _emit(datasets.build_report("fit", inputs, report.to_dict(), checks), out)


@cli.command()
@click.option("--family", required=True)
@click.option("--rows", required=True, help="Block row counts n0,n1,...,nk")
@click.option("--cols", type=int, default=1, show_default=True)
@with_kernel_options
@click.option("--level", type=click.Choice(["fast", "full"]), default="fast", show_default=True)
@click.option("--count", type=int, default=2000, show_default=True, help="Monte Carlo draws at --level full")
@click.option("--seed", type=int, default=None, help="Defaults to MULTIMATRIX_SEED")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def check(config, family, rows, cols, kernel, q, r, level, count, seed, out):
    """Run the normalisation, consistency, reduction and Monte Carlo checks"""
    seed = config.seed if seed is None else seed
    try:
        fam = Family.parse(family)
        structure = BlockStructure(_parse_rows(rows), cols)
        fam.default_roles(structure.k)
        spec = _kernel_from_flags(kernel, q, r, structure.dim) or KernelSpec.normal(structure.dim)
    except (DatasetError, DomainError) as exc:
        _fail("check", exc, EXIT_INPUT)

    try:
        results = run_checks(fam, structure, spec, level, count, seed, config.quad_tolerance)
    except UnsupportedConfiguration as exc:
        _fail("check", exc, EXIT_INPUT)
    except (DomainError, QuadratureFailure) as exc:
        _fail("check", exc, EXIT_DOMAIN)

    inputs = {
        "family": fam.value,
        "structure": structure.to_dict(),
        "kernel": spec.to_json(),
        "level": level,
        "count": count,
    }
    summary = {"passed": sum(c.passed for c in results), "total": len(results)}
    _emit(datasets.build_report("check", inputs, summary, results, seed), out)
    if summary["passed"] != summary["total"]:
        sys.exit(EXIT_CHECK_FAILED)


@cli.command()
@click.argument("operation", type=click.Choice(["compress", "expand", "derive"]))
@click.argument("input_path", type=click.Path())
@click.option("--out", type=click.Path(), default=None)
def transform(operation, input_path, out):
    """Change of variables and derived statistics for data preparation

    compress/expand read {"matrices": [...]}; derive reads
    {"structure", "roles", "raw": [[X0, ..., Xk], ...]} and writes a dataset.
    """
    try:
        doc = datasets.read_json(input_path)
        if not isinstance(doc, dict):
            raise DatasetError("transform input must be a JSON object")
        if operation == "derive":
            structure = BlockStructure.from_dict(doc["structure"])
            roles = parse_roles(doc["roles"])
            raw = doc["raw"]
            if not isinstance(raw, list) or not raw:
                raise DatasetError("raw must be a non-empty list of block lists")
        else:
            matrices = doc["matrices"]
    except (KeyError, TypeError) as exc:
        _fail("transform", DatasetError(f"missing or malformed field: {exc}"), EXIT_INPUT)
    except (DatasetError, DomainError) as exc:
        _fail("transform", exc, EXIT_INPUT)

    try:
        if operation == "derive":
            draws = []
            for index, blocks in enumerate(raw):
                try:
                    draws.append(derive(blocks, structure, roles))
                except DomainError as exc:
                    raise type(exc)(f"replicate {index}: {exc}") from exc
            dataset = datasets.Dataset(structure, draws[0].roles, tuple(draws), {"derived_from": input_path})
            _emit(dataset.to_dict(), out)
            return
        op = compress if operation == "compress" else expand
        mapped = [op(x) for x in matrices]
    except MultimatrixError as exc:
        _fail("transform", exc, EXIT_DOMAIN)

    results = {
        "matrices": [x.tolist() for x, _ in mapped],
        "log_jacobians": [j for _, j in mapped],
    }
    _emit(datasets.build_report("transform", {"operation": operation, "input": input_path}, results), out)


if __name__ == "__main__":
    cli()
