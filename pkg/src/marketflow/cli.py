"""Command-line entry point.

    marketflow <subcommand> [--config FILE] [flags]

Subcommands: returns, granger, graph, mst, compare, synth, te.  Settings come
from built-in defaults, then an optional ``key = value`` config file, then
command-line flags (highest precedence).  Every JSON artifact carries the
resolved settings under ``meta.config``.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import causal_graph as cg
from .exceptions import ConfigError, MarketflowError
from .infotheory import discrete_transfer_entropy, discretize
from .ingest import compute_returns, load_price_csv, preprocess, write_panel_csv
from .synthetic import VarSpec, chain_spec, generate_var, price_panel_from_returns
from .ultrametric import (CorrMatrix, check_metric_properties, correlation_matrix,
                          kruskal_mst, subdominant_distance, to_distance)
from .var_granger import CausalityMatrix, causality_matrix

logger = logging.getLogger("marketflow")

SUBCOMMANDS = ("returns", "granger", "graph", "mst", "compare", "synth", "te")
METHODS = ("f_test", "surrogate")
SCHEMES = ("equiquantile", "equiwidth")
PRESETS = ("chain", "independent", "custom")


@dataclasses.dataclass
class RunConfig:
    input: str = None
    date_column: str = "date"
    lag: object = "auto"
    p_max: int = 10
    alpha: float = 0.01
    method: str = "f_test"
    bins: int = 3
    scheme: str = "equiquantile"
    surrogates: int = 100
    seed: int = 42
    output: str = "."
    flagged: str = None
    demean: bool = True
    detrend: bool = True
    standardize: bool = False
    source: str = None
    target: str = None
    conditional: bool = False
    correlation: str = None
    matrix: str = None
    synth_preset: str = "chain"
    synth_n: int = 3
    synth_T: int = 2000
    synth_p: int = 2
    synth_strength: float = 0.4
    synth_coupling: str = None
    synth_noise_sd: float = 1.0
    initial_price: float = 100.0

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return parse_config(overrides=d)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _to_bool(key, value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {value!r}")


def _coerce(key, value):
    if key not in _FIELDS:
        raise ConfigError(key, "unknown key")
    default = _FIELDS[key].default
    if value is None:
        return None
    try:
        if key == "lag":
            if str(value).strip().lower() == "auto":
                return "auto"
            return int(value)
        if isinstance(default, bool):
            return _to_bool(key, value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse {value!r}") from None


def _validate(cfg):
    if not 0 < cfg.alpha <= 1:
        raise ConfigError("alpha", f"must lie in (0, 1], got {cfg.alpha}")
    if cfg.bins < 2:
        raise ConfigError("bins", f"must be >= 2, got {cfg.bins}")
    if cfg.lag != "auto" and cfg.lag < 1:
        raise ConfigError("lag", f"must be >= 1 or 'auto', got {cfg.lag}")
    if cfg.p_max < 1:
        raise ConfigError("p_max", "must be >= 1")
    if cfg.method not in METHODS:
        raise ConfigError("method", f"must be one of {METHODS}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError("scheme", f"must be one of {SCHEMES}")
    if cfg.surrogates < 1:
        raise ConfigError("surrogates", "must be >= 1")
    if cfg.synth_preset not in PRESETS:
        raise ConfigError("synth_preset", f"must be one of {PRESETS}")
    if cfg.initial_price <= 0:
        raise ConfigError("initial_price", "must be positive")
    return cfg


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {n} is not 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (None values skipped)."""
    merged = {}
    if path is not None:
        if not Path(path).exists():
            raise ConfigError("config", f"file {path} not found")
        merged.update(read_config_file(path))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = RunConfig()
    for key, value in merged.items():
        setattr(cfg, key, _coerce(key, value))
    return _validate(cfg)


def _build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("-i", "--input", help="price CSV (date,<label>,...)")
    common.add_argument("-o", "--output", help="output directory")
    common.add_argument("--date-column", dest="date_column")
    common.add_argument("--lag", help="lag order or 'auto'")
    common.add_argument("--p-max", dest="p_max", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--bins", type=int)
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--surrogates", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--flagged", help="file with one vertex label per line")
    for name in ("demean", "detrend", "standardize"):
        common.add_argument(f"--{name}", dest=name, action="store_const", const=True)
        common.add_argument(f"--no-{name}", dest=name, action="store_const", const=False)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="marketflow", description=__doc__.split("\n")[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    helps = {
        "returns": "log-returns CSV",
        "granger": "causality matrix CSV + JSON",
        "graph": "pruned graph and causal tree",
        "mst": "correlation MST and ultrametric",
        "compare": "causal tree vs MST edge report",
        "synth": "simulate a VAR into a price CSV",
        "te": "discrete transfer entropy for one pair",
    }
    subs = {name: sub.add_parser(name, parents=[common], allow_abbrev=False, help=text)
            for name, text in helps.items()}
    subs["graph"].add_argument("--matrix", help="granger.json to reuse instead of recomputing")
    subs["mst"].add_argument("--correlation", help="square correlation CSV instead of --input")
    p = subs["synth"]
    p.add_argument("--preset", dest="synth_preset", choices=PRESETS)
    p.add_argument("--n", dest="synth_n", type=int)
    p.add_argument("--T", dest="synth_T", type=int)
    p.add_argument("--p", dest="synth_p", type=int)
    p.add_argument("--strength", dest="synth_strength", type=float)
    p.add_argument("--coupling", dest="synth_coupling",
                   help="JSON list of p n-by-n matrices (preset custom)")
    p.add_argument("--noise-sd", dest="synth_noise_sd", type=float)
    p.add_argument("--initial-price", dest="initial_price", type=float)
    p = subs["te"]
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--conditional", action="store_const", const=True)
    return parser


# --- pipeline helpers ------------------------------------------------------

def _require_input(cfg):
    if not cfg.input:
        raise ConfigError("input", "an input price CSV is required")
    return cfg.input


def _returns(cfg):
    prices = load_price_csv(_require_input(cfg), cfg.date_column)
    return compute_returns(prices)


def _prepared(cfg):
    panel = _returns(cfg)
    return preprocess(panel, demean=cfg.demean, detrend=cfg.detrend,
                      standardize=cfg.standardize)


def _flags(cfg):
    if not cfg.flagged:
        return {}
    labels = [ln.strip() for ln in Path(cfg.flagged).read_text(encoding="utf-8").splitlines()]
    return {lab: ["flagged"] for lab in labels if lab}


def _meta(cfg, lag=None, **extra):
    meta = {"lag": lag, "alpha": cfg.alpha, "method": cfg.method, "seed": cfg.seed}
    meta.update(extra)
    meta["config"] = cfg.to_dict()
    return meta


def _write(outdir, name, text):
    path = Path(outdir) / name
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.info("wrote %s", path)
    return path


def _dump(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _matrix(cfg):
    if cfg.matrix:
        return CausalityMatrix.from_dict(json.loads(Path(cfg.matrix).read_text()))
    return causality_matrix(_prepared(cfg), p=cfg.lag, method=cfg.method,
                            n_surrogates=cfg.surrogates, seed=cfg.seed, p_max=cfg.p_max)


def _graph_and_tree(cfg):
    m = _matrix(cfg)
    graph = cg.threshold_adjacency(m, cfg.alpha, flags=_flags(cfg))
    graph.meta = _meta(cfg, m.lag, weight="te")
    tree = cg.extract_causal_tree(graph)
    return m, graph, tree


def _read_correlation_csv(path):
    frame = pd.read_csv(path, index_col=0)
    labels = [str(c) for c in frame.columns]
    values = frame.to_numpy(dtype=float)
    if values.shape != (len(labels), len(labels)):
        raise ValueError(f"correlation CSV {path} is not square")
    return CorrMatrix(labels, values)


def _mst(cfg):
    if cfg.correlation:
        corr = _read_correlation_csv(cfg.correlation)
        source = "correlation"
    else:
        corr = correlation_matrix(_prepared(cfg))
        source = "preprocessed_returns"
    dist = to_distance(corr)
    tree = kruskal_mst(dist)
    ultra = subdominant_distance(tree)
    return corr, dist, tree, ultra, source


# --- subcommands -----------------------------------------------------------

def cmd_returns(cfg, out):
    panel = _returns(cfg)
    write_panel_csv(panel, out / "returns.csv", cfg.date_column)
    _write(out, "returns.json", _dump({
        "labels": panel.labels, "n_samples": panel.n_samples,
        "preprocessing": panel.preprocessing.as_dict(), "meta": _meta(cfg)}))


def cmd_granger(cfg, out):
    m = _matrix(cfg)
    lines = ["source," + ",".join(m.labels)]
    for i, lab in enumerate(m.labels):
        lines.append(lab + "," + ",".join(repr(float(v)) for v in m.gc[i]))
    _write(out, "granger_gc.csv", "\n".join(lines) + "\n")
    d = m.to_dict()
    d["meta"] = _meta(cfg, m.lag)
    _write(out, "granger.json", _dump(d))


def cmd_graph(cfg, out):
    _, graph, tree = _graph_and_tree(cfg)
    _write(out, "graph.dot", cg.export_dot(graph, "causality"))
    _write(out, "graph.json", cg.export_json(graph))
    _write(out, "tree.dot", cg.export_dot(tree, "causal_tree"))
    _write(out, "tree.json", cg.export_json(tree))


def _mst_graph(cfg, tree, ultra, source):
    report = check_metric_properties(ultra, ultrametric=True)
    g = tree.to_graph(_meta(cfg, None, directed=False, distance_source=source,
                            preprocessing={"demeaned": cfg.demean, "detrended": cfg.detrend,
                                           "standardized": cfg.standardize},
                            ultrametric_check={"passed": report.passed,
                                               "violation": report.violation}))
    return g


def cmd_mst(cfg, out):
    _, _, tree, ultra, source = _mst(cfg)
    g = _mst_graph(cfg, tree, ultra, source)
    _write(out, "mst.dot", cg.export_dot(g, "mst"))
    _write(out, "mst.json", cg.export_json(g))


def cmd_compare(cfg, out):
    _, graph, tree = _graph_and_tree(cfg)
    _, _, mst, ultra, source = _mst(cfg)
    mst_graph = _mst_graph(cfg, mst, ultra, source)
    causal_pairs = {tuple(sorted((a.source, a.target))) for a in tree.arcs if not a.synthetic}
    mst_pairs = {tuple(sorted((a.source, a.target))) for a in mst_graph.arcs}
    shared = sorted(causal_pairs & mst_pairs)
    union = causal_pairs | mst_pairs
    _write(out, "tree.dot", cg.export_dot(tree, "causal_tree"))
    _write(out, "tree.json", cg.export_json(tree))
    _write(out, "mst.dot", cg.export_dot(mst_graph, "mst"))
    _write(out, "mst.json", cg.export_json(mst_graph))
    _write(out, "compare.json", _dump({
        "shared_edges": [list(e) for e in shared],
        "causal_tree_edges": [list(e) for e in sorted(causal_pairs)],
        "mst_edges": [list(e) for e in sorted(mst_pairs)],
        "n_shared": len(shared),
        "jaccard": len(shared) / len(union) if union else 1.0,
        "meta": _meta(cfg, tree.meta.get("lag")),
    }))


def _var_spec(cfg):
    if cfg.synth_preset == "chain":
        return chain_spec(n=cfg.synth_n, coupling=cfg.synth_strength, p=cfg.synth_p,
                          T=cfg.synth_T, seed=cfg.seed)
    if cfg.synth_preset == "independent":
        coupling = np.zeros((cfg.synth_p, cfg.synth_n, cfg.synth_n))
    else:
        if not cfg.synth_coupling:
            raise ConfigError("synth_coupling", "required for preset 'custom'")
        try:
            coupling = np.asarray(json.loads(cfg.synth_coupling), dtype=float)
        except (ValueError, TypeError):
            raise ConfigError("synth_coupling", "not a JSON list of matrices") from None
    return VarSpec(n=cfg.synth_n, p=cfg.synth_p, coupling=coupling,
                   noise_sd=cfg.synth_noise_sd, T=cfg.synth_T, seed=cfg.seed)


def cmd_synth(cfg, out):
    spec = _var_spec(cfg)
    prices = price_panel_from_returns(generate_var(spec), cfg.initial_price)
    write_panel_csv(prices, out / "synth_prices.csv", cfg.date_column)
    _write(out, "synth.json", _dump({
        "labels": prices.labels, "n": spec.n, "p": spec.p, "T": spec.T,
        "coupling": spec.coupling.tolist(), "noise_sd": spec.noise_sd.tolist(),
        "spectral_radius": spec.spectral_radius(), "meta": _meta(cfg, spec.p)}))


def cmd_te(cfg, out):
    if not cfg.source or not cfg.target:
        missing = "source" if not cfg.source else "target"
        raise ConfigError(missing, "te needs --source and --target")
    panel = _prepared(cfg)
    lag = 1 if cfg.lag == "auto" else cfg.lag
    sym = {lab: discretize(panel.column(lab), cfg.bins, cfg.scheme) for lab in panel.labels}
    cond_labels = ([lab for lab in panel.labels if lab not in (cfg.source, cfg.target)]
                   if cfg.conditional else [])
    res = discrete_transfer_entropy(sym[cfg.source], sym[cfg.target],
                                    [sym[c] for c in cond_labels], lag)
    _write(out, "te.json", _dump({
        "source": cfg.source, "target": cfg.target, "conditioned_on": cond_labels,
        "te": res.value, "n_samples": res.n_samples, "state_space": res.state_space,
        "small_sample": res.small_sample, "meta": _meta(cfg, lag)}))
    print(f"TE({cfg.source} -> {cfg.target}) = {res.value:.6g} nats")


COMMANDS = {"returns": cmd_returns, "granger": cmd_granger, "graph": cmd_graph,
            "mst": cmd_mst, "compare": cmd_compare, "synth": cmd_synth, "te": cmd_te}


def run(argv=None):
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose")}
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"marketflow: error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"marketflow: error: {exc}", file=sys.stderr)
        return 2
    except (MarketflowError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"marketflow: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
