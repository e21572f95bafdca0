"""Command-line front end.

    python -m app eval --example 1 --ell 1 --role transfer
    python -m app eval --measure data/lebesgue_pi.json --role weyl
    python -m app verify --suite reciprocity
    python -m app model --measure data/two_atoms.json --kappa 0.5 --n 2 -o m.json
    python -m app invert --samples w_samples.csv --window -2 2
    python -m app examples

Reports go to stdout (or ``--output``); logs go to stderr.
"""
import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd
import structlog
from pydantic import ValidationError

from app.config import settings
from app.core.errors import LSystemError, NormalizationMismatch
from app.core.logging import configure_logging
from app.models.domain import AnalyticFn, FunctionRole
from app.models.schemas import (
    BuildModelRequest,
    Command,
    GridSpec,
    JobSpec,
    MeasureSpec,
    ModelDump,
    OutputFormat,
    Source,
)
from app.services.calculus_service import CalculusService
from app.services.donoghue_service import DonoghueService
from app.services.examples_service import ExamplesService
from app.services.measure_service import DEFAULT_EPS_LADDER, MeasureService
from app.services.model_service import ModelService
from app.services.verify_service import SUITES, VerifyService

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_PARSE = 2
EXIT_POLE_SATURATION = 3
EXIT_IO = 4
EXIT_NORMALIZATION = 5

DEFAULT_RHO = -2.0
FRAME_COLUMNS = ["re_z", "im_z", "re_f", "im_f", "pole_flag"]

measure_service = MeasureService()
calculus_service = CalculusService()
model_service = ModelService(measures=measure_service, calculus=calculus_service)
donoghue_service = DonoghueService(measure_service, model_service)
examples_service = ExamplesService()


# --- argument parsing ---------------------------------------------------------

def _add_grid_args(p: argparse.ArgumentParser):
    p.add_argument("--grid", choices=["default", "model", "standard"], default="default",
                   help="Preset grid; the --re/--im flags override single bounds.")
    p.add_argument("--re-min", type=float, dest="re_min")
    p.add_argument("--re-max", type=float, dest="re_max")
    p.add_argument("--im-min", type=float, dest="im_min")
    p.add_argument("--im-max", type=float, dest="im_max")
    p.add_argument("--n-re", type=int, dest="n_re")
    p.add_argument("--n-im", type=int, dest="n_im")


def _add_output_args(p: argparse.ArgumentParser):
    p.add_argument("-o", "--output", help="Output path (default: stdout).")
    p.add_argument("--format", choices=[f.value for f in OutputFormat], default="csv")


def _add_example_args(p: argparse.ArgumentParser):
    p.add_argument("--example", type=int, choices=[1, 2, 3, 4], dest="example_id")
    p.add_argument("--ell", type=float, default=1.0)
    p.add_argument("--rho", type=float, help="Boundary ratio of example 4.")
    p.add_argument("--mu", type=float, nargs=2, metavar=("RE", "IM"),
                   help="Unimodular boundary phase of example 3.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app", description=settings.APP_NAME)
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "eval", help="Evaluate one function role on a grid.",
        description="A --measure file is read as the Weyl function M as it stands; --kappa only "
                    "enters the step from the Livsic to the characteristic function. A --model "
                    "file carries its own kappa and is rescaled to its Donoghue weights first, "
                    "so its impedance equals the model Weyl function.")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--measure", help="Measure JSON file.")
    source.add_argument("--model", help="Model JSON file written by the model command.")
    source.add_argument("--example", type=int, choices=[1, 2, 3, 4], dest="example_id")
    p.add_argument("--ell", type=float, default=1.0)
    p.add_argument("--rho", type=float)
    p.add_argument("--mu", type=float, nargs=2, metavar=("RE", "IM"))
    p.add_argument("--kappa", type=float, default=0.0,
                   help="Class of the chain for --measure; ignored for --model and --example.")
    p.add_argument("--role", choices=[r.value for r in FunctionRole if r is not FunctionRole.OTHER],
                   default="weyl")
    _add_grid_args(p)
    _add_output_args(p)

    p = sub.add_parser("verify", help="Run the property suites.")
    p.add_argument("--suite", action="append", choices=list(SUITES) + ["all"],
                   help="Repeatable; default: all suites.")
    p.add_argument("--seed", type=int)
    _add_output_args(p)

    p = sub.add_parser("model", help="Discretize a measure into a model JSON file.")
    p.add_argument("--measure", required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--realize", action="store_true",
                   help="Rescale the measure into the class of --kappa before discretizing.")
    p.add_argument("--close-tail", type=float, dest="close_tail")
    p.add_argument("-o", "--output")

    p = sub.add_parser("invert", help="Recover density and atoms by Stieltjes inversion.")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--measure")
    source.add_argument("--samples", help="CSV written by eval (re_z, im_z, im_f columns).")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"), default=(-5.0, 5.0))
    p.add_argument("--grid-n", type=int, dest="grid_n", default=401)
    p.add_argument("--eps", type=float, nargs="+", default=list(DEFAULT_EPS_LADDER))
    p.add_argument("--density", help="Also write the density table (CSV) here.")
    _add_output_args(p)

    p = sub.add_parser("examples", help="Summarize the interval examples.")
    _add_example_args(p)
    _add_output_args(p)
    return parser


def grid_from_args(args) -> GridSpec:
    base = {"default": GridSpec(), "model": GridSpec.model_default(),
            "standard": GridSpec.standard()}[getattr(args, "grid", "default")]
    overrides = {name: getattr(args, name, None)
                 for name in ("re_min", "re_max", "im_min", "im_max", "n_re", "n_im")}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return GridSpec(**{**base.model_dump(), **overrides}) if overrides else base


def job_from_args(args) -> JobSpec:
    command = Command(args.command)
    source, path = Source.NONE, None
    if getattr(args, "measure", None):
        source, path = Source.MEASURE, args.measure
    elif getattr(args, "model", None) and command is Command.EVAL:
        source, path = Source.MODEL, args.model
    elif getattr(args, "samples", None):
        source, path = Source.SAMPLES, args.samples
    elif getattr(args, "example_id", None) is not None:
        source = Source.EXAMPLE
    return JobSpec(
        command=command,
        source=source,
        path=path,
        example_id=getattr(args, "example_id", None),
        ell=getattr(args, "ell", 1.0),
        rho=getattr(args, "rho", None),
        mu=tuple(args.mu) if getattr(args, "mu", None) else None,
        kappa=getattr(args, "kappa", 0.0),
        role=getattr(args, "role", "weyl"),
        grid=grid_from_args(args),
        output=getattr(args, "output", None),
        format=getattr(args, "format", "csv"),
    )


# --- I/O ----------------------------------------------------------------------

def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit_text(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_frame(frame: pd.DataFrame, job: JobSpec, output: Optional[str] = None):
    output = job.output if output is None else output
    if job.format is OutputFormat.JSON:
        _emit_text(frame.to_json(orient="records", double_precision=15), output)
        return
    _emit_text(frame.to_csv(index=False, float_format="%.17g", na_rep="nan",
                            lineterminator="\n"), output)


def _mu(job: JobSpec) -> Optional[complex]:
    return None if job.mu is None else complex(*job.mu)


# --- commands -----------------------------------------------------------------

def function_for_job(job: JobSpec) -> AnalyticFn:
    if job.source is Source.EXAMPLE:
        bundle = examples_service.bundle(job.example_id, job.ell, job.rho, _mu(job))
        return bundle.role(job.role)
    if job.source is Source.MODEL:
        model = model_service.load(ModelDump.model_validate_json(_read(job.path)))
        if job.role == FunctionRole.IMPEDANCE.value:
            return model_service.impedance_function(model)
        return calculus_service.role_from_weyl(model_service.weyl_function(model), job.role,
                                               model.kappa)
    measure = MeasureSpec.model_validate_json(_read(job.path))
    return calculus_service.role_from_weyl(measure_service.weyl_function(measure), job.role,
                                           job.kappa)


def evaluation_frame(fn: AnalyticFn, grid: GridSpec) -> pd.DataFrame:
    rows = []
    for ev in calculus_service.evaluate_grid(fn, grid):
        value = ev.value if ev.value is not None else complex(math.nan, math.nan)
        rows.append((ev.z.real, ev.z.imag, value.real, value.imag, int(ev.pole)))
    return pd.DataFrame(rows, columns=FRAME_COLUMNS)


def run_eval(job: JobSpec, args) -> int:
    fn = function_for_job(job)
    frame = evaluation_frame(fn, job.grid)
    _emit_frame(frame, job)
    poles = int(frame["pole_flag"].sum())
    if poles > settings.POLE_SATURATION * len(frame):
        logger.error("pole_saturation", poles=poles, points=len(frame), function=fn.label)
        return EXIT_POLE_SATURATION
    logger.info("evaluated", function=fn.label, points=len(frame), poles=poles)
    return EXIT_OK


def run_verify(job: JobSpec, args) -> int:
    suites = args.suite or ["all"]
    selected = list(SUITES) if "all" in suites else list(dict.fromkeys(suites))
    reports = VerifyService(seed=args.seed).run_all(selected)
    frame = pd.DataFrame(
        [{"suite": r.suite, **c.model_dump()} for r in reports for c in r.checks],
        columns=["suite", "name", "status", "max_residual", "tolerance", "note"],
    )
    _emit_frame(frame, job)
    failed = frame[frame["status"] == "FAIL"]
    for report in reports:
        logger.info("suite_result", suite=report.suite, passed=report.passed)
    return EXIT_VERIFY_FAILED if len(failed) else EXIT_OK


def run_model(job: JobSpec, args) -> int:
    request = BuildModelRequest(measure=MeasureSpec.model_validate_json(_read(job.path)),
                                kappa=job.kappa, n=args.n, realize=args.realize)
    if request.realize:
        model = donoghue_service.realize(request.measure, request.kappa, request.n,
                                         close_tail=args.close_tail)
    else:
        model = model_service.build_model(request.measure, request.kappa, request.n)
    _emit_text(model_service.dump(model).model_dump_json(by_alias=True, indent=2), job.output)
    return EXIT_OK


def run_invert(job: JobSpec, args) -> int:
    window = tuple(args.window)
    if job.source is Source.SAMPLES:
        table = measure_service.stieltjes_invert_samples(pd.read_csv(job.path), window)
    else:
        measure = MeasureSpec.model_validate_json(_read(job.path))
        table = measure_service.stieltjes_invert(measure_service.weyl_function(measure), window,
                                                 eps_ladder=args.eps, grid_n=args.grid_n)
    if job.format is OutputFormat.JSON:
        _emit_text(table.model_dump_json(indent=2), job.output)
    else:
        _emit_frame(table.atoms_frame(), job)
    if args.density:
        _emit_frame(table.to_frame(), job.model_copy(update={"format": OutputFormat.CSV}),
                    args.density)
    return EXIT_OK


def examples_frame(job: JobSpec) -> pd.DataFrame:
    ids = [job.example_id] if job.example_id is not None else [1, 2, 3, 4]
    rows = []
    for example_id in ids:
        rho = job.rho if job.rho is not None or example_id != 4 else DEFAULT_RHO
        bundle = examples_service.bundle(example_id, job.ell, rho, _mu(job))
        W, V = bundle.transfer.evaluate(1j), bundle.impedance.evaluate(1j)
        nan = complex(math.nan, math.nan)
        w, v = W.value if not W.pole else nan, V.value if not V.pole else nan
        rows.append({
            "example_id": example_id,
            "ell": job.ell,
            "kappa": bundle.kappa.kappa if bundle.kappa is not None else math.nan,
            "re_W_i": w.real, "im_W_i": w.imag,
            "re_V_i": v.real, "im_V_i": v.imag,
            "roles": " ".join(bundle.available_roles()),
        })
    return pd.DataFrame(rows)


def run_examples(job: JobSpec, args) -> int:
    _emit_frame(examples_frame(job), job)
    return EXIT_OK


HANDLERS: Dict[Command, Callable[[JobSpec, argparse.Namespace], int]] = {
    Command.EVAL: run_eval,
    Command.VERIFY: run_verify,
    Command.MODEL: run_model,
    Command.INVERT: run_invert,
    Command.EXAMPLES: run_examples,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARSE
    configure_logging(args.log_level, stream=sys.stderr)
    try:
        job = job_from_args(args)
        return HANDLERS[job.command](job, args)
    except ValidationError as exc:
        logger.error("invalid_input", errors=exc.error_count(), detail=str(exc))
        return EXIT_PARSE
    except NormalizationMismatch as exc:
        logger.error("normalization_mismatch", measured=exc.measured, required=exc.required)
        return EXIT_NORMALIZATION
    except OSError as exc:
        logger.error("io_failure", detail=str(exc))
        return EXIT_IO
    except (LSystemError, KeyError, ValueError) as exc:
        logger.error("rejected", error=type(exc).__name__, detail=str(exc))
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
