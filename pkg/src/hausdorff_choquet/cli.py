"""``hchoquet``: content brackets, Choquet integrals, inequality checks and sweeps.

Exit codes: 0 success, 2 usage or domain error, 3 bracket inversion.
Every run writes a manifest (config echo, version, timings, warnings) to
``<out>.manifest.json``, or to stderr when no ``--out`` is given.  The
report itself carries no timings, so identical configs give identical bytes.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import __version__
from .choquet import CHOQUET_OPTIONS, choquet_integral
from .content import ContentOptions, content_bracket
from .errors import BracketInversionError, ValidationError
from .grid import ScalarField, ball_set, block_set, make_grid
from .io import dumps_report, read_field, read_set, sweep_csv
from .testbed import (
    CantorSpec,
    TentSpec,
    cantor_capacitary,
    cantor_set,
    radial_bump,
    random_bump_sum,
    tent2d,
    truncate,
)
from .verify import (
    DEFAULT_CAPS,
    InequalityParams,
    SweepReport,
    VerifyConfig,
    cantor_blowup,
    sharpness_tent,
    verify_ko_lemma,
    verify_limit,
    verify_ps,
    verify_spw,
    verify_superlevel,
)

SET_FAMILIES = ("ball", "block", "cantor", "file")
FIELD_FAMILIES = ("bump", "tent", "indicator", "truncated-bump", "bump-sum", "cantor", "file")


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


class Run:
    """Config echo, timings and warnings for one invocation."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.timings: dict[str, float] = {}
        self.warnings: list[str] = []
        self.started = time.time()

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t0

    def warn(self, msg: str):
        self.warnings.append(msg)
        click.echo(f"warning: {msg}", err=True)

    def manifest(self, status: str, error: str | None = None) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "started": self.started,
            "wall_clock": time.time() - self.started,
            "timings": self.timings,
            "warnings": self.warnings,
            "status": status,
            "error": error,
        }


def _parse_list(text, cast):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [cast(x) for x in text]
    try:
        return [cast(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse list {text!r}: {exc}") from None


def _merge_config(ctx: click.Context, params: dict, run: Run) -> dict:
    path = params.get("config")
    if not path:
        return params
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object")
    out = dict(params)
    for key, val in doc.items():
        k = key.replace("-", "_")
        if k not in params or k == "config":
            raise ValidationError(f"unknown config key {key!r}")
        src = ctx.get_parameter_source("fmt" if k == "format" else k)
        if src == click.core.ParameterSource.COMMANDLINE and params[k] != val:
            run.warn(f"config file overrides --{k.replace('_', '-')}={params[k]!r} with {val!r}")
        out[k] = val
    return out


def _content_options(cfg: dict, base: ContentOptions) -> ContentOptions:
    kw = {}
    if cfg.get("budget") is not None:
        kw["exact_budget"] = int(cfg["budget"])
    if cfg.get("slack") is not None:
        kw["slack"] = float(cfg["slack"])
    if not kw:
        return base
    return ContentOptions(**{**base.to_json(), **kw})


# ---------------------------------------------------------------------------
# fixtures


def build_set(cfg: dict):
    fam, n, cells, R = cfg["family"], int(cfg["n"]), int(cfg["grid"]), float(cfg["radius"])
    if fam not in SET_FAMILIES:
        raise ValidationError(f"unknown set family {fam!r}; choose one of {', '.join(SET_FAMILIES)}")
    if fam == "file":
        if not cfg.get("file"):
            raise ValidationError("family 'file' needs --file")
        return read_set(cfg["file"])
    if fam == "cantor":
        return cantor_set(CantorSpec(int(cfg["level"]), cells_per_side=int(cfg["cells_per_side"])))
    if R <= 0:
        raise ValidationError("radius must be positive")
    g = make_grid(n, (-2 * R, 2 * R), cells)
    if fam == "ball":
        # centres inside R - h/2, so the cell union hugs B(0, R)
        return ball_set(g, np.zeros(n), R - g.h / 2)
    side = max(1, int(round(R / g.h)))
    start = [(cells - side) // 2] * n
    return block_set(g, start, side)


def build_field(cfg: dict) -> ScalarField:
    fam, n, cells, R = cfg["family"], int(cfg["n"]), int(cfg["grid"]), float(cfg["radius"])
    if fam not in FIELD_FAMILIES:
        raise ValidationError(f"unknown field family {fam!r}; choose one of {', '.join(FIELD_FAMILIES)}")
    if fam == "file":
        if not cfg.get("file"):
            raise ValidationError("family 'file' needs --file")
        return read_field(cfg["file"])
    if fam == "bump":
        return radial_bump(n, R, cells)
    if fam == "truncated-bump":
        return truncate(radial_bump(n, R, cells), 0.25, 0.75)
    if fam == "indicator":
        g = make_grid(n, (-2 * R, 2 * R), cells)
        return ScalarField.indicator(ball_set(g, np.zeros(n), R - g.h / 2))
    if fam == "bump-sum":
        g = make_grid(n, (-1.25, 1.25), cells)
        return random_bump_sum(g, np.random.default_rng(int(cfg["seed"])))
    if fam == "tent":
        if n != 2:
            raise ValidationError("the tent family lives in n = 2")
        r = float(cfg["r"])
        return tent2d(TentSpec(r, max(1, int(round(cells * r / 4)))))
    return cantor_capacitary(CantorSpec(int(cfg["level"]), cells_per_side=int(cfg["cells_per_side"])))


# ---------------------------------------------------------------------------
# commands


def _caps(cfg: dict, theorem: str) -> tuple:
    caps = dict(DEFAULT_CAPS)
    if cfg.get("cap") is not None:
        if cfg["cap"] <= 0:
            raise ValidationError("cap must be positive")
        caps[theorem] = float(cfg["cap"])
    return tuple(caps.items())


def _delta(cfg: dict, default: float) -> float:
    return float(default if cfg.get("delta") is None else cfg["delta"])


def _p(cfg: dict, default: float | None) -> float:
    if cfg.get("p") is None:
        if default is None:
            raise ValidationError("--p is required for this command")
        return float(default)
    return float(cfg["p"])


def _ladder(cfg: dict) -> int:
    m = int(cfg["ladder"])
    if m < 2:
        raise ValidationError(f"ladder needs at least 2 levels, got {m}")
    return m


def run_content(cfg: dict, run: Run):
    opts = _content_options(cfg, ContentOptions())
    with run.stage("build"):
        E = build_set(cfg)
    with run.stage("bracket"):
        br = content_bracket(E, _delta(cfg, E.grid.n), opts)
    if br.meta.get("exact_optimal") is False:
        run.warn("exact search stopped at the node budget; the cover is an incumbent, not proven optimal")
    if br.meta.get("lp", {}).get("status") == "lp-failed":
        run.warn("packing LP failed; lower bound fell back")
    return br.to_json()


def run_integrate(cfg: dict, run: Run):
    opts = _content_options(cfg, CHOQUET_OPTIONS)
    m = _ladder(cfg)
    with run.stage("build"):
        f = build_field(cfg)
    with run.stage("integrate"):
        cb = choquet_integral(f, _delta(cfg, f.grid.n), m, float(cfg["alpha"]), opts)
    return cb.to_json()


def run_verify(cfg: dict, run: Run):
    th = cfg["theorem"]
    n = int(cfg["n"])
    kappa = float(cfg["kappa"])
    # validate the window before building anything
    if th == "ps":
        params = InequalityParams("ps", n, _delta(cfg, n), _p(cfg, None), kappa)
    elif th == "limit":
        d = _delta(cfg, n)
        params = InequalityParams("limit", n, d, d / n, kappa)
    else:
        params = InequalityParams(th, n, float(n), 1.0, kappa)
    vc = VerifyConfig(m=_ladder(cfg), options=_content_options(cfg, CHOQUET_OPTIONS), caps=_caps(cfg, th))
    with run.stage("build"):
        f = build_field(cfg)
    if f.grid.n != n:
        raise ValidationError(f"--n {n} does not match the field dimension {f.grid.n}")
    with run.stage("verify"):
        if th == "ps":
            rep = verify_ps(f, params, vc)
        elif th == "spw":
            rep = verify_spw(f, kappa, vc)
        elif th == "limit":
            rep = verify_limit(f, params.delta, kappa, vc)
        elif th == "ko":
            top = f.max()
            a = 0.0 if cfg.get("a") is None else float(cfg["a"])
            b = top / 2 if cfg.get("b") is None else float(cfg["b"])
            rep = verify_ko_lemma(f, a, b, kappa, vc)
        else:
            rep = verify_superlevel(f, kappa, vc)
    if rep.verdict == "violation":
        run.warn("certified violation: the brackets exclude the inequality at this cap")
    return rep.to_json()


def run_sweep(cfg: dict, run: Run):
    kind = cfg["kind"]
    workers = int(cfg["workers"])
    if workers < 1:
        raise ValidationError("--workers must be >= 1")
    m = _ladder(cfg)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    mapper = pool.map if pool else map
    try:
        if kind == "tent":
            rs = _parse_list(cfg.get("r_list") or "0.25,0.125,0.0625", float)
            if cfg.get("grid_fixed"):
                res = [int(round(int(cfg["grid"]) * r / 4)) for r in rs]
            else:
                res = [8] * len(rs)
            keep = [(r, q) for r, q in zip(rs, res) if q >= 8]
            for r, q in zip(rs, res):
                if q < 8:
                    run.warn(f"dropping r = {r}: only {q} cells per r (need >= 8)")
            if len(keep) < 3:
                raise ValidationError(f"only {len(keep)} resolvable radii survive; the sweep needs 3")
            vc = VerifyConfig(m=m, options=_content_options(cfg, CHOQUET_OPTIONS))
            with run.stage("sweep"):
                rep = sharpness_tent(
                    float(cfg["kappa"]), float(cfg["alpha"]), [r for r, _ in keep], [q for _, q in keep], vc, mapper
                )
        elif kind == "cantor":
            ks = _parse_list(cfg.get("k_list") or "1,2,3,4", int)
            with run.stage("sweep"):
                rep = cantor_blowup(
                    _delta(cfg, 0.8),
                    _p(cfg, 1.0),
                    ks,
                    int(cfg["cells_per_side"]),
                    0.5,
                    m,
                    mapper=mapper,
                )
        else:
            raise ValidationError(f"unknown sweep kind {kind!r}; choose tent or cantor")
    finally:
        if pool:
            pool.shutdown()
    return rep


# ---------------------------------------------------------------------------
# click plumbing


def _common(func):
    opts = [
        click.option("--n", "n", type=int, default=2, show_default=True, help="Spatial dimension."),
        click.option("--delta", type=float, default=None, help="Content dimension [default: n; 0.8 for cantor sweeps]."),
        click.option("--p", "p", type=float, default=None, help="Gradient exponent (ps; cantor sweeps default to 1)."),
        click.option("--kappa", type=float, default=0.0, show_default=True),
        click.option("--alpha", type=float, default=1.0, show_default=True, help="Power of the integrand."),
        click.option("--grid", type=int, default=128, show_default=True, help="Cells per side."),
        click.option("--ladder", type=int, default=12, show_default=True, help="Threshold ladder size m."),
        click.option("--budget", type=int, default=None, help="Node budget of the exact cover search."),
        click.option("--cap", type=float, default=None, help="Verdict cap (overrides the calibrated default)."),
        click.option("--slack", type=float, default=None, help="Packing factor S; must not be below the certified one."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report path (stdout if absent)."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--config", type=click.Path(dir_okay=False), default=None, help="JSON config; wins on conflict."),
        click.option("--family", default=None, help="Set or field family."),
        click.option("--radius", type=float, default=1.0, show_default=True),
        click.option("--r", "r", type=float, default=0.25, show_default=True, help="Tent radius."),
        click.option("--level", type=int, default=2, show_default=True, help="Cantor level k."),
        click.option("--cells-per-side", type=int, default=2, show_default=True, help="Cells across a Cantor square."),
        click.option("--file", type=click.Path(dir_okay=False), default=None, help="Set or field file."),
    ]
    for o in reversed(opts):
        func = o(func)
    return func


def _execute(ctx: click.Context, command: str, params: dict, body):
    fmt = params.pop("fmt")
    params["format"] = fmt
    run = Run(command, dict(params))
    code, err = 1, "unexpected failure"
    out = None
    try:
        cfg = _merge_config(ctx, params, run)
        run.config = cfg
        result = body(cfg, run)
        out = cfg.get("out")
        fmt = cfg.get("format", fmt)
        with run.stage("write"):
            if fmt == "csv":
                if not isinstance(result, SweepReport):
                    raise ValidationError("CSV output is only defined for sweeps")
                footer = [f"slope={result.slope!r}", f"halfwidth={result.halfwidth!r}"]
                text = sweep_csv(result.csv_rows(), SweepReport.CSV_COLUMNS, footer)
            else:
                text = dumps_report(result)
            if out:
                Path(out).write_text(text)
            else:
                click.echo(text, nl=False)
        code, err = 0, None
    except ValidationError as exc:
        code, err = 2, str(exc)
        click.echo(f"error: {exc}", err=True)
    except BracketInversionError as exc:
        code, err = 3, str(exc)
        click.echo(f"internal error: {exc}", err=True)
    finally:
        status = "ok" if code == 0 else "error"
        man = dumps_report(run.manifest(status, err))
        target = run.config.get("out") or out
        if target:
            Path(str(target) + ".manifest.json").write_text(man)
        else:
            click.echo(man, err=True, nl=False)
    ctx.exit(code)


def _with_collector(fn):
    def wrapped(cfg, run):
        h = _Collector()
        lg = logging.getLogger("hausdorff_choquet")
        lg.addHandler(h)
        try:
            return fn(cfg, run)
        finally:
            lg.removeHandler(h)
            for msg in h.messages:
                run.warnings.append(msg)

    return wrapped


@click.group()
@click.version_option(__version__)
def main():
    """Hausdorff-content brackets and capacitary Sobolev inequality checks."""


@main.command()
@_common
@click.pass_context
def content(ctx, **params):
    """Bracket the delta-content of a set (ball | block | cantor | file)."""
    params["family"] = params["family"] or "ball"
    _execute(ctx, "content", params, _with_collector(run_content))


@main.command()
@_common
@click.pass_context
def integrate(ctx, **params):
    """Bracket the Choquet integral of a field against delta-content."""
    params["family"] = params["family"] or "bump"
    _execute(ctx, "integrate", params, _with_collector(run_integrate))


@main.command()
@_common
@click.option("--theorem", type=click.Choice(["ps", "spw", "limit", "ko", "superlevel"]), required=True)
@click.option("--a", "a", type=float, default=None, help="Lower truncation level (ko).")
@click.option("--b", "b", type=float, default=None, help="Upper truncation level (ko).")
@click.pass_context
def verify(ctx, **params):
    """Evaluate both sides of one inequality and report a verdict."""
    params["family"] = params["family"] or "bump"
    _execute(ctx, "verify", params, _with_collector(run_verify))


@main.command()
@_common
@click.option("--kind", type=click.Choice(["tent", "cantor"]), required=True)
@click.option("--r-list", default=None, help="Comma-separated decreasing tent radii.")
@click.option("--k-list", default=None, help="Comma-separated increasing Cantor levels.")
@click.option("--grid-fixed", is_flag=True, help="Tent: use --grid cells for every r instead of 8 cells per r.")
@click.pass_context
def sweep(ctx, **params):
    """Tent sharpness or Cantor blow-up sweep; CSV rows via --format csv."""
    _execute(ctx, "sweep", params, _with_collector(run_sweep))


if __name__ == "__main__":  # pragma: no cover
    main()
