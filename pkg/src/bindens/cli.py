"""Command line interface: estimate, cv, query, bench.

Configuration comes from a JSON file; results go to JSON reports written
atomically (temp file + rename) with a stable key order, so identical
inputs reproduce identical bytes except for the trailing "timing" block.
Exit codes: 0 success, 2 configuration or data problems, 3 capacity
refusals, 4 numeric failures.
"""

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import backend
from .cv import SearchSpace, coordinate_descent_w, evaluate_space
from .errors import (
    BindensError,
    BudgetExceededError,
    CapacityError,
    ConfigError,
    DataError,
    NumericError,
)
from .estimators import (
    MAX_FULL_N,
    CountsVector,
    EstimatorConfig,
    counts_from_observations,
    element_linear,
    element_transformed,
    element_waak,
    estimate_at,
    estimate_full,
    squared_element_general,
    squared_element_linear,
    squared_element_waak,
)
from .shrinkage import ShrinkageSpec
from .transforms import Transform, normalizer
from .walsh import index_of_point, point_of_index

REPORT_VERSION = 1

__all__ = ["main"]


# ---------------------------------------------------------------------------
# data loading


def _decode_token(token, encoding, where):
    if encoding == "signs":
        if token in ("1", "+1"):
            return 1
        if token == "-1":
            return -1
        raise DataError(f"{where}: expected -1/+1 tokens, got {token!r}")
    if token == "0":
        return 1
    if token == "1":
        return -1
    raise DataError(f"{where}: expected 0/1 tokens, got {token!r}")


def load_observations(path, encoding="signs", delimiter=",", header=False):
    """Read one observation per line; returns a CountsVector."""
    rows = []
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if header and lineno == 1:
                continue
            text = line.strip()
            if not text:
                continue
            if delimiter == "ws":
                tokens = text.split()
            else:
                tokens = [t.strip() for t in text.split(delimiter)]
            tokens = [t for t in tokens if t]
            if not tokens:
                continue
            where = f"{path}:{lineno}"
            rows.append([_decode_token(t, encoding, where) for t in tokens])
    if not rows:
        raise DataError(f"{path}: no observations found")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DataError(f"{path}: rows have inconsistent lengths {sorted(widths)}")
    return counts_from_observations(rows)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return payload


# ---------------------------------------------------------------------------
# config (de)serialization


def _require(mapping, key, what):
    if key not in mapping:
        raise ConfigError(f"{what} is missing required key {key!r}")
    return mapping[key]


def _weight_vector(raw, n, what):
    if isinstance(raw, (int, float)):
        return np.full(n, float(raw))
    if isinstance(raw, list):
        arr = np.asarray(raw, dtype=np.float64)
        if arr.size != n:
            raise ConfigError(f"{what} has {arr.size} entries, expected {n}")
        return arr
    raise ConfigError(f"{what} must be a number or a list of numbers")


def shrinkage_from_dict(d, n):
    if not isinstance(d, dict):
        raise ConfigError("shrinkage must be a JSON object")
    form = _require(d, "form", "shrinkage")
    try:
        if form == "dense":
            values = _require(d, "values", "dense shrinkage")
            spec = ShrinkageSpec.dense(values)
            if spec.n != n:
                raise ConfigError(f"dense shrinkage is for n={spec.n}, data has n={n}")
            return spec
        if form == "sparse":
            entries = _require(d, "entries", "sparse shrinkage")
            if not isinstance(entries, dict):
                raise ConfigError("sparse shrinkage entries must map index -> value")
            converted = {}
            for key, val in entries.items():
                try:
                    converted[int(key)] = float(val)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad sparse shrinkage entry {key!r}: {val!r}") from exc
            return ShrinkageSpec.sparse(n, converted)
        if form == "single_interaction":
            return ShrinkageSpec.single_interaction(
                _weight_vector(_require(d, "w", "single-interaction shrinkage"), n, "shrinkage w")
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown shrinkage form {form!r}")


def shrinkage_to_dict(spec):
    if spec.form == "dense":
        return {"form": "dense", "values": [float(v) for v in spec.values]}
    if spec.form == "sparse":
        return {"form": "sparse", "entries": {str(idx): val for idx, val in spec.entries}}
    return {"form": "single_interaction", "w": [float(v) for v in spec.w]}


_TRANSFORM_FIELDS = {
    "identity": (),
    "exponential": ("gamma",),
    "logistic": ("gamma",),
    "step": ("threshold", "low", "high"),
    "relu": (),
    "tanh": ("scale",),
    "elu": ("alpha",),
}


def transform_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("transform must be a JSON object")
    kind = _require(d, "kind", "transform")
    if kind not in _TRANSFORM_FIELDS:
        raise ConfigError(f"unknown transform kind {kind!r}; expected one of {sorted(_TRANSFORM_FIELDS)}")
    kwargs = {}
    for name in _TRANSFORM_FIELDS[kind]:
        kwargs[name] = float(_require(d, name, f"{kind} transform"))
    try:
        return Transform(kind=kind, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def transform_to_dict(transform):
    out = {"kind": transform.kind}
    for name in _TRANSFORM_FIELDS[transform.kind]:
        out[name] = getattr(transform, name)
    return out


def estimator_from_dict(d, n):
    if not isinstance(d, dict):
        raise ConfigError("estimator must be a JSON object")
    variant = _require(d, "variant", "estimator")
    if variant == "linear":
        return EstimatorConfig.linear(shrinkage_from_dict(_require(d, "shrinkage", "linear estimator"), n))
    if variant == "transformed":
        return EstimatorConfig.transformed(
            shrinkage_from_dict(_require(d, "shrinkage", "transformed estimator"), n),
            transform_from_dict(_require(d, "transform", "transformed estimator")),
        )
    if variant == "waak":
        w = _weight_vector(_require(d, "w", "waak estimator"), n, "waak w")
        return EstimatorConfig.waak(w, float(_require(d, "gamma", "waak estimator")))
    if variant == "aa_classic":
        return EstimatorConfig.aa_classic(n, float(_require(d, "lambda", "aa_classic estimator")))
    if variant == "mixture":
        raw = _require(d, "components", "mixture estimator")
        if not isinstance(raw, list):
            raise ConfigError("mixture components must be a list")
        comps = []
        for item in raw:
            if not isinstance(item, dict):
                raise ConfigError("each mixture component must be a JSON object")
            comps.append(
                (
                    float(_require(item, "weight", "mixture component")),
                    estimator_from_dict(_require(item, "estimator", "mixture component"), n),
                )
            )
        return EstimatorConfig.mixture(tuple(comps))
    raise ConfigError(f"unknown estimator variant {variant!r}")


def estimator_to_dict(config):
    if config.variant == "linear":
        return {"variant": "linear", "shrinkage": shrinkage_to_dict(config.shrinkage)}
    if config.variant == "transformed":
        return {
            "variant": "transformed",
            "shrinkage": shrinkage_to_dict(config.shrinkage),
            "transform": transform_to_dict(config.transform),
        }
    if config.variant == "waak":
        return {
            "variant": "waak",
            "gamma": config.gamma,
            "w": [float(v) for v in config.shrinkage.w],
        }
    if config.variant == "aa_classic":
        return {"variant": "aa_classic", "lambda": config.lam, "n": config.n}
    return {
        "variant": "mixture",
        "components": [
            {"weight": weight, "estimator": estimator_to_dict(cfg)}
            for weight, cfg in config.components
        ],
    }


# ---------------------------------------------------------------------------
# query cell parsing


def _parse_pattern(item, n):
    """Sign pattern like '+-+', optionally with one '?' marking the
    coordinate whose conditional expectation is requested."""
    if len(item) != n:
        raise ConfigError(f"pattern {item!r} has {len(item)} coordinates, data has n={n}")
    holes = [pos for pos, ch in enumerate(item) if ch == "?"]
    if len(holes) > 1:
        raise ConfigError(f"pattern {item!r} has {len(holes)} '?' marks; at most one is supported")
    if not holes:
        signs = [1 if ch == "+" else -1 for ch in item]
        return {"kind": "cell", "cell": index_of_point(signs), "label": item}
    pos = holes[0]
    plus = [1 if ch == "+" else -1 for ch in item.replace("?", "+")]
    minus = list(plus)
    minus[pos] = -1
    return {
        "kind": "conditional",
        "pattern": item,
        "coordinate": pos + 1,
        "cell_plus": index_of_point(plus),
        "cell_minus": index_of_point(minus),
    }


def parse_cells_spec(items, n):
    """Parse query cell specifiers: integer indexes and sign patterns."""
    parsed = []
    for item in items:
        if isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            parsed.append({"kind": "cell", "cell": int(item), "label": None})
            continue
        if not isinstance(item, str):
            raise ConfigError(f"query cell {item!r} must be an integer or a sign pattern")
        text = item.strip()
        if not text:
            continue
        if text.lstrip("+-").isdigit() and not set(text) <= {"+", "-"}:
            parsed.append({"kind": "cell", "cell": int(text), "label": None})
            continue
        if set(text) <= {"+", "-", "?"}:
            parsed.append(_parse_pattern(text, n))
            continue
        raise ConfigError(f"query cell {text!r} is neither an index nor a +/-/? pattern")
    if not parsed:
        raise ConfigError("no query cells given")
    return parsed


def _point_label(cell, n):
    if n > 64:
        return None
    signs = point_of_index(cell, n)
    return "".join("+" if s > 0 else "-" for s in signs)


# ---------------------------------------------------------------------------
# report writing


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def write_report(path, payload):
    text = json.dumps(payload, indent=2) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(prefix=".bindens-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _data_block(counts, path):
    return {
        "path": str(path),
        "observations": counts.total,
        "distinct_cells": len(counts.cells),
        "n": counts.n,
        "counts": {str(idx): cnt for idx, cnt in counts.cells},
    }


def _normalizer_block(results):
    return [
        {
            "value": _json_safe(res.value),
            "log_value": _json_safe(res.log_value),
            "method": res.method,
        }
        for res in results
    ]


def _risk_row(report, extra=None):
    row = {
        "estimator": estimator_to_dict(report.config),
        "value": _json_safe(report.value),
        "dominated": report.dominated,
        "element_evals": report.element_evals,
        "squared_element_evals": report.squared_element_evals,
    }
    if extra:
        row.update(extra)
    return row


# ---------------------------------------------------------------------------
# commands


def _common_header(command, n, seed):
    return {
        "report_version": REPORT_VERSION,
        "command": command,
        "n": n,
        "seed": seed,
        "backend": backend.ACTIVE_BACKEND,
    }


def cmd_estimate(args):
    started = time.perf_counter()
    counts = load_observations(args.data, args.encoding, args.delimiter, args.header)
    config_doc = load_config(args.config)
    seed = int(config_doc.get("seed", 0))
    estimator_doc = _require(config_doc, "estimator", "config")
    config = estimator_from_dict(estimator_doc, counts.n)

    query_doc = config_doc.get("query", {})
    raw_cells = query_doc.get("cells", "all")
    if raw_cells == "all" or raw_cells == ["all"]:
        if counts.n > MAX_FULL_N:
            raise CapacityError(
                f"full estimates are limited to n <= {MAX_FULL_N}; list explicit query cells for n={counts.n}"
            )
        estimate = estimate_full(config, counts)
        cells_out = None
    else:
        if not isinstance(raw_cells, list):
            raise ConfigError("query.cells must be \"all\" or a list of cells")
        parsed = parse_cells_spec(raw_cells, counts.n)
        cells = []
        for item in parsed:
            if item["kind"] != "cell":
                raise ConfigError("estimate only takes plain cells; use the query command for '?' patterns")
            cells.append(item["cell"])
        estimate = estimate_at(cells, config, counts)
        cells_out = list(estimate.cells)

    report = _common_header("estimate", counts.n, seed)
    report["data"] = _data_block(counts, args.data)
    report["estimator"] = estimator_to_dict(config)
    block = {
        "full": cells_out is None,
        "negativity": estimate.negativity,
        "sum": float(np.sum(estimate.values)),
        "normalizers": _normalizer_block(estimate.normalizers),
    }
    if cells_out is not None:
        block["cells"] = [str(c) if c > 2**53 else c for c in cells_out]
    block["values"] = [float(v) for v in estimate.values]
    report["estimate"] = block
    report["timing"] = {"elapsed_ms": (time.perf_counter() - started) * 1000.0}
    write_report(args.out, report)
    print(
        f"estimate: n={counts.n} observations={counts.total} "
        f"cells={'all' if cells_out is None else len(cells_out)} "
        f"sum={block['sum']:.12g} negativity={estimate.negativity}"
    )
    print(f"wrote {args.out}")
    return 0


def _search_from_dict(d, n):
    if not isinstance(d, dict):
        raise ConfigError("cv.search must be a JSON object")
    kind = _require(d, "kind", "cv.search")
    budget = d.get("budget")
    if kind == "aa_lambda":
        return SearchSpace.aa_lambda_grid(n, [float(v) for v in _require(d, "lambdas", "aa_lambda search")], budget=budget)
    if kind == "waak":
        gammas = [float(v) for v in _require(d, "gammas", "waak search")]
        w_doc = _require(d, "w", "waak search")
        if not isinstance(w_doc, dict):
            raise ConfigError("waak search needs a w object with a mode")
        mode = _require(w_doc, "mode", "waak search w")
        if mode == "fixed":
            w = _weight_vector(_require(w_doc, "values", "fixed-w search"), n, "search w")
            return SearchSpace.waak_fixed_w(w, gammas, budget=budget)
        if mode == "shared_grid":
            grid = [float(v) for v in _require(w_doc, "grid", "shared-grid search")]
            return SearchSpace.waak_shared_grid(n, gammas, grid, budget=budget)
        if mode == "product":
            axes = _require(w_doc, "axes", "product search")
            if not isinstance(axes, list):
                raise ConfigError("product search axes must be a list of lists")
            if len(axes) != n:
                raise ConfigError(f"product search needs {n} axes, got {len(axes)}")
            return SearchSpace.waak_product(gammas, [[float(v) for v in axis] for axis in axes], budget=budget)
        raise ConfigError(f"unknown waak search mode {mode!r}")
    if kind == "linear_sparse":
        indexes = [int(v) for v in _require(d, "indexes", "linear_sparse search")]
        grid = [float(v) for v in _require(d, "value_grid", "linear_sparse search")]
        return SearchSpace.linear_sparse_grid(n, indexes, grid, budget=budget)
    if kind == "mixture":
        comps = [estimator_from_dict(item, n) for item in _require(d, "components", "mixture search")]
        return SearchSpace.mixture_weight_grid(comps, int(_require(d, "denominator", "mixture search")), budget=budget)
    raise ConfigError(f"unknown search kind {kind!r}")


def cmd_cv(args):
    started = time.perf_counter()
    counts = load_observations(args.data, args.encoding, args.delimiter, args.header)
    config_doc = load_config(args.config)
    seed = int(config_doc.get("seed", 0))
    cv_doc = _require(config_doc, "cv", "config")
    if not isinstance(cv_doc, dict):
        raise ConfigError("cv block must be a JSON object")
    loss = args.loss or cv_doc.get("loss", "kl")
    threads = int(args.threads)
    search_doc = _require(cv_doc, "search", "cv block")
    kind = _require(search_doc, "kind", "cv.search")

    report = _common_header("cv", counts.n, seed)
    report["data"] = _data_block(counts, args.data)
    report["loss"] = loss
    report["search"] = search_doc
    partial = False

    if kind == "waak_descent":
        gammas = [float(v) for v in _require(search_doc, "gammas", "waak_descent search")]
        grid = [float(v) for v in _require(search_doc, "grid", "waak_descent search")]
        sweeps = int(search_doc.get("sweeps", 2))
        initial = _weight_vector(search_doc.get("initial", grid[0]), counts.n, "descent initial w")
        rows = []
        best = None
        for gamma in gammas:
            cfg, rep = coordinate_descent_w(initial, gamma, loss, counts, sweeps, grid, threads=threads)
            rows.append((cfg, rep, {"gamma": gamma, "sweeps": sweeps}))
            if best is None or _cli_better(rep, best[1]):
                best = (cfg, rep)
        evaluated = rows
        best_cfg, best_rep = best
    else:
        space = _search_from_dict(search_doc, counts.n)
        reports, best_pos, truncated = evaluate_space(space, loss, counts, threads=threads)
        evaluated = [(space.configs[pos], reports[pos], {"candidate_index": pos}) for pos in range(len(reports))]
        best_cfg, best_rep = space.configs[best_pos], reports[best_pos]
        partial = truncated

    ranked = sorted(
        range(len(evaluated)),
        key=lambda pos: _rank_key(evaluated[pos][1]),
    )
    report["evaluations"] = [
        _risk_row(evaluated[pos][1], extra={**evaluated[pos][2], "rank": rank + 1})
        for rank, pos in enumerate(ranked)
    ]
    report["best"] = _risk_row(best_rep)
    report["partial"] = partial
    report["timing"] = {"elapsed_ms": (time.perf_counter() - started) * 1000.0}
    write_report(args.out, report)
    value = best_rep.value
    print(f"cv: loss={loss} candidates={len(evaluated)} best_value={value:.12g} partial={partial}")
    print(f"wrote {args.out}")
    if partial:
        print("error: search budget exhausted before the grid was fully evaluated", file=sys.stderr)
        return 2
    return 0


def _cli_better(challenger, incumbent):
    if math.isnan(challenger.value):
        return False
    if math.isnan(incumbent.value):
        return True
    if challenger.loss == "kl":
        return challenger.value > incumbent.value
    return challenger.value < incumbent.value


def _rank_key(report):
    value = report.value
    if math.isnan(value):
        value = math.inf if report.loss == "se" else -math.inf
    return -value if report.loss == "kl" else value


def cmd_query(args):
    started = time.perf_counter()
    try:
        with open(args.fit, "r", encoding="utf-8") as handle:
            fit = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read fit report {args.fit}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.fit} is not valid JSON: {exc}") from exc
    for key in ("report_version", "n", "data", "estimator"):
        if key not in fit:
            raise DataError(f"fit report {args.fit} is missing key {key!r}")
    n = int(fit["n"])
    counts = CountsVector.from_cells(
        n, {int(idx): int(cnt) for idx, cnt in fit["data"]["counts"].items()}
    )
    config = estimator_from_dict(fit["estimator"], n)
    parsed = parse_cells_spec([s for s in args.cells.split(",")], n)

    plain = [item["cell"] for item in parsed if item["kind"] == "cell"]
    needed = list(plain)
    for item in parsed:
        if item["kind"] == "conditional":
            needed.extend([item["cell_plus"], item["cell_minus"]])
    estimate = estimate_at(needed, config, counts)
    value_of = dict(zip(needed, (float(v) for v in estimate.values)))

    results = []
    for item in parsed:
        if item["kind"] == "cell":
            cell = item["cell"]
            entry = {"cell": str(cell) if cell > 2**53 else cell, "value": value_of[cell]}
            label = item["label"] or _point_label(cell, n)
            if label:
                entry["point"] = label
            results.append(entry)
        else:
            p_plus = value_of[item["cell_plus"]]
            p_minus = value_of[item["cell_minus"]]
            denom = p_plus + p_minus
            entry = {
                "pattern": item["pattern"],
                "coordinate": item["coordinate"],
                "cells": [item["cell_plus"], item["cell_minus"]],
                "values": [p_plus, p_minus],
            }
            if denom > 0:
                entry["conditional_expectation"] = (p_plus - p_minus) / denom
                entry["undefined"] = False
            else:
                entry["conditional_expectation"] = None
                entry["undefined"] = True
            results.append(entry)

    report = _common_header("query", n, int(fit.get("seed", 0)))
    report["fit"] = str(args.fit)
    report["estimator"] = fit["estimator"]
    report["query"] = {"cells": args.cells, "results": results}
    report["negativity"] = bool(estimate.negativity)
    report["timing"] = {"elapsed_ms": (time.perf_counter() - started) * 1000.0}
    write_report(args.out, report)
    for entry in results:
        if "cell" in entry:
            print(f"cell {entry.get('point') or entry['cell']}: {entry['value']:.12g}")
        else:
            ce = entry["conditional_expectation"]
            shown = "undefined" if ce is None else f"{ce:.12g}"
            print(f"conditional {entry['pattern']} (coordinate {entry['coordinate']}): {shown}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# bench


def _time_call(fn, repeats=5):
    fn()  # warm any JIT/caches before measuring
    t0 = time.perf_counter()
    fn()
    single = time.perf_counter() - t0
    inner = max(1, min(2000, int(0.0005 / max(single, 1e-9))))
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best * 1000.0


def _random_cell(rng, n):
    raw = rng.integers(0, 256, size=(n + 7) // 8, dtype=np.uint8).tobytes()
    return (int.from_bytes(raw, "little") & ((1 << n) - 1)) + 1


def _random_sparse(rng, n, nonzeros):
    entries = {1: 1.0}
    while len(entries) < nonzeros:
        entries[_random_cell(rng, n)] = float(rng.uniform(0.0, 1.0))
    return ShrinkageSpec.sparse(n, entries)


def _flat_check(name, times, limit):
    lo, hi = min(times.values()), max(times.values())
    ratio = hi / lo if lo > 0 else math.inf
    return {"name": name, "pass": bool(ratio <= limit), "max_over_min": ratio, "limit": limit}


def _growth_check(name, times, n_small, n_big, minimum):
    if n_small not in times or n_big not in times:
        return {"name": name, "pass": True, "skipped": True}
    ratio = times[n_big] / times[n_small] if times[n_small] > 0 else math.inf
    return {
        "name": name,
        "pass": bool(ratio >= minimum),
        "growth": ratio,
        "from_n": n_small,
        "to_n": n_big,
        "minimum": minimum,
    }


def _bound_check(name, value_ms, limit_ms):
    return {"name": name, "pass": bool(value_ms < limit_ms), "time_ms": value_ms, "limit_ms": limit_ms}


def cmd_bench(args):
    started = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    max_n = int(args.max_n)
    if max_n < 8:
        raise ConfigError(f"--max-n must be at least 8, got {max_n}")
    dense_grid = [n for n in (8, 12, 16, 20) if n <= max_n]
    big_grid = [100, 1000, 10000]
    rows = []

    # Regime 1: identity transform, leading coefficient pinned to 1,
    # sparse support. Normalization is a constant, elements cost one
    # pass over the nonzeros regardless of n.
    norm_t, el_t, sq_t = {}, {}, {}
    for n in dense_grid + big_grid:
        spec = _random_sparse(rng, n, nonzeros=8)
        ident = Transform.identity()
        i, j = _random_cell(rng, n), _random_cell(rng, n)
        norm_t[n] = _time_call(lambda s=spec, t=ident: normalizer(t, s))
        el_t[n] = _time_call(lambda a=i, b=j, s=spec: element_linear(a, b, s))
        sq_t[n] = _time_call(lambda a=i, b=j, s=spec: squared_element_linear(a, b, s))
    checks = [
        _flat_check("normalization_constant_time", norm_t, 16.0),
        _flat_check(
            "element_time_independent_of_n",
            {n: el_t[n] for n in big_grid},
            4.0,
        ),
        _flat_check("squared_element_time_independent_of_n", {n: sq_t[n] for n in big_grid}, 4.0),
    ]
    rows.append(
        {
            "regime": "linear_sparse",
            "expected": {"normalization": "O(1)", "element": "O(nonzeros)", "squared_element": "O(nonzeros)"},
            "times_ms": {
                "normalization": {str(n): norm_t[n] for n in norm_t},
                "element": {str(n): el_t[n] for n in el_t},
                "squared_element": {str(n): sq_t[n] for n in sq_t},
            },
            "checks": checks,
        }
    )

    # Regime 2: exponential base with per-coordinate weights (the
    # weighted product kernel); everything closed-form in O(n).
    norm_t, el_t, sq_t = {}, {}, {}
    for n in dense_grid + big_grid:
        w = rng.uniform(0.0, 1.0, size=n)
        spec = ShrinkageSpec.single_interaction(w)
        expo = Transform.exponential(2.0)
        i, j = _random_cell(rng, n), _random_cell(rng, n)
        norm_t[n] = _time_call(lambda s=spec, t=expo: normalizer(t, s))
        el_t[n] = _time_call(lambda a=i, b=j, ww=w: element_waak(a, b, ww, 2.0))
        sq_t[n] = _time_call(lambda a=i, b=j, ww=w: squared_element_waak(a, b, ww, 2.0))
    big = big_grid[-1]
    checks = [
        _bound_check("normalization_under_10ms_at_n10000", norm_t[big], 10.0),
        _bound_check("element_under_10ms_at_n10000", el_t[big], 10.0),
        _bound_check("squared_element_under_10ms_at_n10000", sq_t[big], 10.0),
    ]
    rows.append(
        {
            "regime": "waak",
            "expected": {"normalization": "O(n)", "element": "O(n)", "squared_element": "O(n)"},
            "times_ms": {
                "normalization": {str(n): norm_t[n] for n in norm_t},
                "element": {str(n): el_t[n] for n in el_t},
                "squared_element": {str(n): sq_t[n] for n in sq_t},
            },
            "checks": checks,
        }
    )

    # Regime 3: logistic transform over single-interaction weights.
    # Normalization collapses to half the row length; squared elements
    # need the dense pass.
    norm_t, el_t, sq_t = {}, {}, {}
    for n in dense_grid + big_grid:
        w = rng.uniform(0.0, 1.0, size=n)
        spec = ShrinkageSpec.single_interaction(w)
        logi = Transform.logistic(3.0)
        i, j = _random_cell(rng, n), _random_cell(rng, n)
        norm_t[n] = _time_call(lambda s=spec, t=logi: normalizer(t, s))
        el_t[n] = _time_call(lambda a=i, b=j, s=spec, t=logi: element_transformed(a, b, s, t))
        if n in dense_grid:
            sq_t[n] = _time_call(lambda a=i, b=j, s=spec, t=logi: squared_element_general(a, b, s, t))
    checks = [_flat_check("normalization_constant_time", norm_t, 16.0)]
    if len(dense_grid) >= 2:
        checks.append(
            _growth_check("squared_element_dense_growth", sq_t, dense_grid[-2], dense_grid[-1], 2.0)
        )
    rows.append(
        {
            "regime": "logistic_single_interaction",
            "expected": {"normalization": "O(1)", "element": "O(n)", "squared_element": "O(n 2^n)"},
            "times_ms": {
                "normalization": {str(n): norm_t[n] for n in norm_t},
                "element": {str(n): el_t[n] for n in el_t},
                "squared_element": {str(n): sq_t[n] for n in sq_t},
            },
            "checks": checks,
        }
    )

    # Regime 4: no closed form (relu over sparse shrinkage); the
    # normalizer pays the full dense transform.
    norm_t, el_t, sq_t = {}, {}, {}
    for n in dense_grid:
        spec = _random_sparse(rng, n, nonzeros=8)
        relu = Transform.relu()
        i, j = _random_cell(rng, n), _random_cell(rng, n)
        norm_t[n] = _time_call(lambda s=spec, t=relu: normalizer(t, s))
        el_t[n] = _time_call(lambda a=i, b=j, s=spec, t=relu: element_transformed(a, b, s, t))
        sq_t[n] = _time_call(lambda a=i, b=j, s=spec, t=relu: squared_element_general(a, b, s, t))
    checks = [_flat_check("element_time_fixed_support", el_t, 4.0)]
    if len(dense_grid) >= 2:
        lo, hi = dense_grid[-2], dense_grid[-1]
        checks.append(_growth_check("normalization_dense_growth", norm_t, lo, hi, 2.0))
        checks.append(_growth_check("squared_element_dense_growth", sq_t, lo, hi, 2.0))
    rows.append(
        {
            "regime": "general_no_closed_form",
            "expected": {"normalization": "O(n 2^n)", "element": "O(nonzeros)", "squared_element": "O(n 2^n)"},
            "times_ms": {
                "normalization": {str(n): norm_t[n] for n in norm_t},
                "element": {str(n): el_t[n] for n in el_t},
                "squared_element": {str(n): sq_t[n] for n in sq_t},
            },
            "checks": checks,
        }
    )

    all_pass = all(check["pass"] for row in rows for check in row["checks"])
    report = _common_header("bench", None, int(args.seed))
    report["max_n"] = max_n
    report["rows"] = rows
    report["all_checks_pass"] = all_pass
    report["timing"] = {"elapsed_ms": (time.perf_counter() - started) * 1000.0}
    write_report(args.out, report)
    for row in rows:
        states = ", ".join(f"{c['name']}={'ok' if c['pass'] else 'FAIL'}" for c in row["checks"]) or "no checks"
        print(f"bench {row['regime']}: {states}")
    print(f"wrote {args.out}")
    if not all_pass:
        print("error: one or more scaling checks failed; see the report rows", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_data_arguments(sub):
    sub.add_argument("--data", required=True, help="observation file, one point per line")
    sub.add_argument("--encoding", choices=("signs", "bits"), default="signs",
                     help="signs: -1/+1 tokens; bits: 0 -> +1, 1 -> -1")
    sub.add_argument("--delimiter", default=",", help="token delimiter; 'ws' splits on whitespace")
    sub.add_argument("--header", action="store_true", help="skip the first line")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bindens",
        description="Density estimation over the {-1,+1}^n binary hypercube.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    est = commands.add_parser("estimate", help="fit one estimator and evaluate it")
    _add_data_arguments(est)
    est.add_argument("--config", required=True, help="JSON config with an 'estimator' block")
    est.add_argument("--out", required=True, help="output report path")
    est.add_argument("--threads", type=int, default=1, help="accepted for interface parity; estimation is single-threaded")
    est.set_defaults(func=cmd_estimate)

    cv = commands.add_parser("cv", help="search configurations by leave-one-out risk")
    _add_data_arguments(cv)
    cv.add_argument("--config", required=True, help="JSON config with a 'cv' block")
    cv.add_argument("--out", required=True, help="output report path")
    cv.add_argument("--loss", choices=("se", "kl"), default=None, help="override the configured loss")
    cv.add_argument("--threads", type=int, default=1, help="parallelism across grid candidates")
    cv.set_defaults(func=cmd_cv)

    query = commands.add_parser("query", help="evaluate a fitted report at new cells")
    query.add_argument("--fit", required=True, help="report written by the estimate command")
    query.add_argument("--cells", required=True,
                       help="comma-separated cell indexes or +/- patterns; one '?' asks for a conditional expectation")
    query.add_argument("--out", required=True, help="output report path")
    query.set_defaults(func=cmd_query)

    bench = commands.add_parser("bench", help="measure element/normalization scaling")
    bench.add_argument("--out", required=True, help="output report path")
    bench.add_argument("--max-n", type=int, default=20, dest="max_n", help="largest dense dimension to time")
    bench.add_argument("--seed", type=int, default=1, help="rng seed for benchmark inputs")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BindensError as exc:  # any remaining package error is a config-level failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
