"""`takagi` command line: one subcommand per computation, artifacts as CSV, JSON, JSONL or SVG."""

import argparse
import asyncio
import contextlib
import csv
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import IO, Any, Dict, Iterator, List, Optional

from takagi import constructions, spectra
from takagi.config import RunConfig, build_config
from takagi.errors import ContractError, EmptyLevelSetError, IdentityError, TakagiError
from takagi.levelsets import cover_level, cover_line, max_set_cover, with_fit
from takagi.piecewise import build
from takagi.randomsim import MonteCarloClient, four_case_table_check, reachable_prefixes
from takagi.rationals import format_rational, parse_rational
from takagi.render import grid_rows, write_csv, write_echo, write_grid_csv, write_grid_svg, write_json
from takagi.schema import CoverReport
from takagi.selftest import run_selftest
from takagi.signs import Rademacher

logger = logging.getLogger(__name__)

COMMANDS = ("render", "levelset", "dimension", "jsr", "extremal", "gray", "line", "simulate", "matrices", "selftest")


@contextlib.contextmanager
def open_output(config: RunConfig) -> Iterator[IO[str]]:
    if config.out:
        with open(config.out, "w", newline="") as stream:
            yield stream
    else:
        yield sys.stdout


def _fractions(values: List[Fraction]) -> List[str]:
    return [format_rational(v) for v in values]


def _write_report(stream: IO[str], config: RunConfig, report: CoverReport) -> None:
    if config.format == "csv":
        echo = dict(config.echo())
        if report.fitted_dimension is not None:
            echo.update(fitted_dimension=f"{report.fitted_dimension:.6f}", residual=f"{report.residual:.3g}")
        write_csv(stream, ["depth", "count"], zip(report.depths, report.counts), echo)
    else:
        write_json(stream, report.model_dump(), config.echo())


# commands


def render(config: RunConfig, stream: IO[str]) -> None:
    gf = build(config.provider(), config.depth)
    if config.format == "svg":
        write_grid_svg(stream, gf, config.echo())
    elif config.format == "csv":
        write_grid_csv(stream, gf, config.echo())
    else:
        rows = grid_rows(gf)
        write_json(stream, {"depth": gf.depth, "x": [r[1] for r in rows], "f": [r[2] for r in rows]}, config.echo())


def levelset(config: RunConfig, stream: IO[str]) -> None:
    provider = config.provider()
    if config.max_set:
        report = max_set_cover(provider, config.max_depth, config.min_depth)
    elif config.slope != 0 or config.intercept is not None:
        intercept = config.intercept if config.intercept is not None else Fraction(0)
        report = cover_line(provider, config.slope, intercept, config.max_depth, config.min_depth)
    elif config.y is not None:
        report = cover_level(provider, config.y, config.max_depth, config.min_depth)
    else:
        raise ContractError("y: levelset needs --y, --slope/--intercept or --max-set")
    try:
        report = with_fit(report, config.method, config.skip, config.period, config.parity)
    except EmptyLevelSetError:
        _write_report(stream, config, report)
        raise
    logger.info("%s: dimension %.4f", report.target, report.fitted_dimension)
    _write_report(stream, config, report)


def _read_counts(path: str) -> CoverReport:
    source = Path(path)
    if not source.is_file():
        raise ContractError(f"counts: no such file {path}")
    depths, counts = [], []
    rows = csv.reader(line for line in source.read_text().splitlines() if line and not line.startswith("#"))
    for row in rows:
        if not row or not row[0].strip().lstrip("-").isdigit():
            continue
        depths.append(int(row[0]))
        counts.append(int(row[1]))
    return CoverReport(target=source.name, depths=depths, counts=counts)


def dimension(config: RunConfig, stream: IO[str]) -> None:
    payload: Dict[str, Any]
    if config.pieces:
        pieces = []
        for item in config.pieces.split(","):
            count, _, ratio = item.partition(":")
            if not ratio:
                raise ContractError(f"pieces: expected count:ratio, got {item!r}")
            pieces.append((int(count), parse_rational(ratio, flag="pieces")))
        payload = {"method": "moran", "dimension": spectra.moran_dimension(pieces)}
    elif config.geometric:
        payload = {"method": "geometric-moran", "dimension": spectra.geometric_moran_dimension()}
    elif config.random_moran:
        payload = {
            "method": "random-moran",
            "root": spectra.random_moran_root(),
            "dimension": spectra.random_moran_dimension(),
        }
    elif config.counts:
        report = with_fit(_read_counts(config.counts), config.method, config.skip, config.period, config.parity)
        payload = {"method": config.method, "dimension": report.fitted_dimension, "report": report.model_dump()}
    else:
        raise ContractError("dimension: give one of --pieces, --geometric, --random-moran or --counts")
    write_json(stream, payload, config.echo())


def jsr(config: RunConfig, stream: IO[str]) -> None:
    if config.rho_scan:
        write_json(stream, spectra.rho_k_limit_scan(config.k_max).model_dump(), config.echo())
        return
    if config.matrices:
        path = Path(config.matrices)
        if not path.is_file():
            raise ContractError(f"matrices: no such file {config.matrices}")
        matrices = spectra.parse_matrices(path.read_text())
    else:
        matrices = {"E": spectra.E, "F": spectra.F}
    bracket = spectra.jsr_bracket(matrices, config.max_len)
    logger.info("jsr in [%.9f, %.9f], witness %s", bracket.lower, bracket.upper, bracket.witness_product)
    write_json(stream, bracket.model_dump(), config.echo())


def extremal(config: RunConfig, stream: IO[str]) -> None:
    built = constructions.extremal_flexible(config.stages)
    columns = ["n", "y", "cells", "type1", "type2", "type3"]
    rows = [
        [b.n, format_rational(b.y), len(stage.cells), *stage.type_counts()]
        for b, stage in zip(built.baselines, built.cells)
    ]
    if config.format == "csv":
        write_csv(stream, columns, rows, config.echo())
        return
    payload: Dict[str, Any] = {"level": format_rational(constructions.EXTREMAL_LEVEL), "stages": [dict(zip(columns, r)) for r in rows]}
    if config.stages >= 4:
        payload["dimension"] = constructions.extremal_dimension(built, first_stage=config.stages // 2)
        payload["expected"] = spectra.DV_STAR
    write_json(stream, payload, config.echo())


def gray(config: RunConfig, stream: IO[str]) -> None:
    if config.which == "zero":
        points = constructions.gray_zero_points(config.m_max, depth=max(config.depth, 16))
        payload = {
            "x_list": _fractions(points.x_list),
            "x_star": format_rational(points.x_star),
            "dimension": spectra.geometric_moran_dimension(),
        }
    elif config.which == "two-fifths":
        copies = constructions.gray_level_two_fifths(config.stages)
        cover = cover_level(Rademacher(), constructions.GRAY_LEVEL, 2 * config.stages)
        report = with_fit(copies.report(), "ratio")
        payload = {
            "baselines": _fractions(copies.baselines),
            "copies": copies.copies,
            "cells": report.counts,
            "dimension": report.fitted_dimension,
            "cover": with_fit(cover, config.method, config.skip, config.period, parity=0).model_dump(),
        }
    else:
        counts = constructions.gray_count_bounds(config.stages)
        payload = {"stages": [{"n": n, "m0": c.m0, "m1": c.m1, "bound": c.bound} for n, c in enumerate(counts)]}
    write_json(stream, payload, config.echo())


def line(config: RunConfig, stream: IO[str]) -> None:
    if config.extremal:
        g, intercept, report = constructions.extremal_line_function(config.slope, config.stages)
        payload = {"function": g.header(), "intercept": format_rational(intercept), "cover": report.model_dump()}
        write_json(stream, payload, config.echo())
        return
    f = config.provider()
    intercept = config.intercept if config.intercept is not None else Fraction(0)
    g, level = constructions.line_reduction(f, config.slope, intercept)
    shift = abs(config.slope)
    if config.max_depth < shift:
        raise ContractError(f"max-depth: must be at least |slope| = {shift}")
    payload = {
        "function": g.to_text(),
        "level": format_rational(level),
        "line_cover": cover_line(f, config.slope, intercept, config.max_depth - shift, min_depth=0).model_dump(),
        "level_cover": cover_level(g, level, config.max_depth, min_depth=shift).model_dump(),
    }
    write_json(stream, payload, config.echo())


async def simulate(config: RunConfig, stream: IO[str], client: MonteCarloClient) -> None:
    p, trials, depth, base = config.p, config.trials, config.depth, config.seed_base
    experiment = config.experiment
    if experiment == "table":
        checks = 0
        for levels in reachable_prefixes(trials, max_stages=config.stages, seed_base=base):
            checks += len(four_case_table_check(levels, k_trunc=config.k_trunc).checks)
        write_json(stream, {"summary": {"prefixes": trials, "checks": checks, "passed": True}}, config.echo())
        return
    if experiment == "z-shape":
        summary, records = await client.z_shape_probability(p, trials, depth, base)
    elif experiment == "z-growth":
        summary, records = await client.z_growth_rate(trials, depth, p, base)
    elif experiment == "zero-dimension":
        summary, records = await client.zero_dimension(config.model, trials, depth, p, base)
    elif experiment == "gw":
        summary, records = await client.gw_maximum(p, trials, depth, base)
    elif experiment == "hitting":
        summary, records = await client.hitting_times(config.level, trials, config.horizon, base)
    else:
        summary, records = await client.model1_max_dimension(p, trials, depth, base)
    stream.write(json.dumps({"config": config.echo()}) + "\n")
    for record in records:
        stream.write(record.model_dump_json() + "\n")
    stream.write(json.dumps({"summary": summary.model_dump()}) + "\n")


def matrices(config: RunConfig, stream: IO[str]) -> None:
    write_echo(stream, config.echo())
    if config.check:
        path = Path(config.check)
        if not path.is_file():
            raise ContractError(f"check: no such file {config.check}")
        parsed = spectra.parse_matrices(path.read_text())
        name = config.name or path.stem
        if name in parsed:
            matrix = parsed[name]
        elif len(parsed) == 1:
            matrix = next(iter(parsed.values()))
        else:
            raise ContractError(f"name: {name!r} is not in {config.check}")
        problem = spectra.compare_transcription(name, matrix)
        if problem:
            raise IdentityError(problem)
        stream.write(f"{name}: ok\n")
        return
    blocks = [matrix.to_text(name) for name, matrix in spectra.NAMED_MATRICES.items()]
    stream.write("\n\n".join(blocks) + "\n")


def write_matrix_files(directory: str, echo: Optional[Dict[str, str]] = None) -> List[Path]:
    header = "".join(f"# {key}={value}\n" for key, value in (echo or {}).items())
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, matrix in spectra.NAMED_MATRICES.items():
        path = target / f"{name}.txt"
        path.write_text(header + matrix.to_text(name) + "\n")
        written.append(path)
    return written


async def selftest(config: RunConfig, stream: IO[str], client: MonteCarloClient) -> None:
    write_echo(stream, config.echo())
    report = await run_selftest(config.matrices_dir, config.mc, client)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        stream.write(f"{status} {check.name}" + (f": {check.detail}" if check.detail else "") + "\n")
    failed = sum(not check.passed for check in report.checks)
    if failed:
        raise IdentityError(f"{failed} of {len(report.checks)} selftest checks failed")


def _is_directory(out: str) -> bool:
    return out.endswith("/") or Path(out).is_dir()


SYNC_COMMANDS = {
    "render": render,
    "levelset": levelset,
    "dimension": dimension,
    "jsr": jsr,
    "extremal": extremal,
    "gray": gray,
    "line": line,
    "matrices": matrices,
}


async def run(config: RunConfig) -> int:
    """Execute one configured command; errors surface as TakagiError subclasses."""
    if config.command == "matrices" and config.out and not config.check and _is_directory(config.out):
        for path in write_matrix_files(config.out, config.echo()):
            logger.info("wrote %s", path)
        return 0
    async with MonteCarloClient(jobs=config.jobs) as client:
        with open_output(config) as stream:
            if config.command == "simulate":
                await simulate(config, stream, client)
            elif config.command == "selftest":
                await selftest(config, stream, client)
            else:
                SYNC_COMMANDS[config.command](config, stream)
    return 0


class Parser(argparse.ArgumentParser):
    """Usage errors are contract errors, exit code 1 like any other bad input."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ContractError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--function", help="provider text, e.g. 'gray' or 'model2 seed=3 p=1/2'")
    common.add_argument("--function-file", help="file holding the provider text")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--format", choices=["csv", "json", "svg"])
    common.add_argument("--jobs", type=int, help="worker threads for simulations")
    common.add_argument("-v", "--verbose", action="count", help="-v for INFO, -vv for DEBUG")

    parser = Parser(prog="takagi", description="Level sets of generalized Takagi functions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", parents=[common], help="partial sum f_n on the dyadic grid")
    p.add_argument("--depth", type=int)

    p = sub.add_parser("levelset", parents=[common], help="cover counts and box dimension")
    p.add_argument("--y", help="level, e.g. 2/5")
    p.add_argument("--slope", type=int)
    p.add_argument("--intercept")
    p.add_argument("--max-set", action="store_true", default=None)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-depth", type=int)
    p.add_argument("--method", choices=["lsq", "ratio"])
    p.add_argument("--skip", type=int)
    p.add_argument("--period", type=int)
    p.add_argument("--parity", type=int, choices=[0, 1])

    p = sub.add_parser("dimension", parents=[common], help="Moran equations and count fits")
    p.add_argument("--pieces", help="count:ratio pairs, e.g. 2:1/4")
    p.add_argument("--geometric", action="store_true", default=None)
    p.add_argument("--random-moran", action="store_true", default=None)
    p.add_argument("--counts", help="CSV of depth,count")
    p.add_argument("--method", choices=["lsq", "ratio"])
    p.add_argument("--skip", type=int)
    p.add_argument("--period", type=int)
    p.add_argument("--parity", type=int, choices=[0, 1])

    p = sub.add_parser("jsr", parents=[common], help="joint spectral radius bracket")
    p.add_argument("--matrices", help="matrix text file")
    p.add_argument("--max-len", type=int)
    p.add_argument("--norm", choices=["entry-sum"])
    p.add_argument("--rho-scan", action="store_true", default=None, help="spectral radii of the tridiagonal family instead")
    p.add_argument("--k-max", type=int)

    p = sub.add_parser("extremal", parents=[common], help="extremal level-set construction")
    p.add_argument("--stages", type=int)

    p = sub.add_parser("gray", parents=[common], help="Gray Takagi special sets")
    p.add_argument("--which", choices=["zero", "two-fifths", "bounds"])
    p.add_argument("--stages", type=int)
    p.add_argument("--m-max", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--method", choices=["lsq", "ratio"])
    p.add_argument("--skip", type=int)

    p = sub.add_parser("line", parents=[common], help="line sections via level sets of a shifted function")
    p.add_argument("--slope", type=int)
    p.add_argument("--intercept")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--extremal", action="store_true", default=None)
    p.add_argument("--stages", type=int)

    p = sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo")
    p.add_argument("--experiment", choices=["z-shape", "z-growth", "zero-dimension", "gw", "hitting", "model1-max", "table"])
    p.add_argument("--model", type=int, choices=[1, 2])
    p.add_argument("--p")
    p.add_argument("--trials", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--seed-base", type=int)
    p.add_argument("--level", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--k-trunc", type=int)
    p.add_argument("--stages", type=int)

    p = sub.add_parser("matrices", parents=[common], help="write or check the pinned matrices")
    p.add_argument("--check", help="matrix file to compare")
    p.add_argument("--name", help="pinned matrix name for --check")

    p = sub.add_parser("selftest", parents=[common], help="exact identity suites")
    p.add_argument("--matrices-dir")
    p.add_argument("--mc", action="store_true", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = build_config(vars(args))
        level = {0: logging.WARNING, 1: logging.INFO}.get(config.verbose, logging.DEBUG)
        logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        return asyncio.run(run(config))
    except TakagiError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
