"""Portfolio/config JSON parsing.  Everything is validated before use.

Schema::

    {
      "kind": "bernoulli" | "geometric" | "table" | "pairwise",
      "params": {...},              # see below
      "neighborhoods": [[...], ...],   # A_i, optional
      "nb": {"mode": "mean" | "meanvar" | "explicit", "r": float, "p": float},
      "z_grid": [float, ...],
      "tranches": [[a, d], ...],
      "recovery": float,
      "description": str
    }

``params`` by kind:

* bernoulli: ``{"p": [p_1, ...]}``
* geometric: ``{"q": [q_1, ...]}`` with ``P(ζ_i = k) = q_i^k (1 - q_i)``
* pairwise:  ``{"p": [...], "pairs": [[i, j, p_ij], ...]}`` (0-based indices)
* table:     ``{"probs": nested list}`` joint pmf, axis i = values of ζ_i
"""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cdo import Portfolio
from .dependency import DependencyModel, chain_neighborhoods
from .dists import DiscreteDist
from .errors import ConfigError, NBSteinError
from .nb import NBParams

__all__ = ["RunConfig", "load_config", "parse_config", "shipped_config", "SHIPPED"]

KINDS = ("bernoulli", "geometric", "table", "pairwise")
MODES = ("mean", "meanvar", "explicit")
TOP_KEYS = {"kind", "params", "neighborhoods", "nb", "z_grid", "tranches", "recovery", "description"}
PARAM_KEYS = {"bernoulli": {"p"}, "geometric": {"q"}, "pairwise": {"p", "pairs"}, "table": {"probs"}}
NB_KEYS = {"mode", "r", "p"}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    values: np.ndarray | None      # p_i (bernoulli/pairwise) or q_i (geometric)
    pairs: dict | None
    probs: np.ndarray | None
    neighborhoods: tuple | None
    mode: str = "mean"
    r: float | None = None
    p: float | None = None
    z_grid: tuple | None = None
    tranches: tuple = ()
    recovery: float = 0.4
    description: str = ""

    @property
    def n(self) -> int:
        if self.probs is not None:
            return self.probs.ndim
        return int(self.values.size)

    @property
    def independent(self) -> bool:
        return self.kind in ("bernoulli", "geometric")

    def dists(self) -> list[DiscreteDist]:
        if self.kind == "bernoulli":
            return [DiscreteDist.bernoulli(x) for x in self.values]
        if self.kind == "geometric":
            return [DiscreteDist.geometric(1.0 - x) for x in self.values]
        raise ConfigError("only independent kinds have per-index laws", "kind")

    def model(self) -> DependencyModel:
        if self.independent:
            return DependencyModel.independent(self.dists())
        A = self.neighborhoods or tuple(chain_neighborhoods(self.n))
        if self.kind == "pairwise":
            return DependencyModel.pairwise(self.values, self.pairs, A)
        return DependencyModel.from_table(self.probs, A)

    def explicit_params(self) -> NBParams | None:
        if self.mode != "explicit":
            return None
        return NBParams(self.r, self.p)

    def portfolio(self) -> Portfolio:
        if self.kind not in ("bernoulli", "pairwise"):
            raise ConfigError("CDO portfolios need Bernoulli defaults (kind bernoulli or pairwise)", "kind")
        return Portfolio(self.values, self.recovery, self.tranches,
                         self.pairs if self.kind == "pairwise" else None, self.neighborhoods)


def _unknown(d: dict, allowed: set, path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", path)


def _number(x, path: str, lo=-math.inf, hi=math.inf) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"expected a number, got {type(x).__name__}", path)
    x = float(x)
    if not (math.isfinite(x) and lo <= x <= hi):
        raise ConfigError(f"value {x} outside [{lo}, {hi}]", path)
    return x


def _vector(x, path: str, lo: float, hi: float) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ConfigError("expected a non-empty list of numbers", path)
    return np.array([_number(v, f"{path}[{i}]", lo, hi) for i, v in enumerate(x)])


def _neighborhoods(x, n: int, path: str) -> tuple:
    if not isinstance(x, list) or len(x) != n:
        raise ConfigError(f"expected a list of {n} index lists", path)
    out = []
    for i, a in enumerate(x):
        if not isinstance(a, list):
            raise ConfigError("expected a list of indices", f"{path}[{i}]")
        idx = set()
        for j, v in enumerate(a):
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < n:
                raise ConfigError(f"index must be an integer in [0, {n})", f"{path}[{i}][{j}]")
            idx.add(v)
        out.append(frozenset(idx | {i}))
    return tuple(out)


def parse_config(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", "$")
    _unknown(raw, TOP_KEYS, "$")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"must be one of {list(KINDS)}", "$.kind")
    params = raw.get("params")
    if not isinstance(params, dict):
        raise ConfigError("required object", "$.params")
    _unknown(params, PARAM_KEYS[kind], "$.params")
    missing = PARAM_KEYS[kind] - set(params)
    if missing:
        raise ConfigError(f"missing {sorted(missing)}", "$.params")

    values = pairs = probs = None
    if kind == "geometric":
        values = _vector(params["q"], "$.params.q", 0.0, 1.0)
        if np.any(values >= 1.0):
            raise ConfigError("q_i must be < 1", "$.params.q")
    elif kind == "table":
        try:
            probs = np.asarray(params["probs"], dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("must be a rectangular nested list of numbers", "$.params.probs") from None
        if probs.ndim == 0 or np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
            raise ConfigError("must be a non-negative joint pmf summing to 1", "$.params.probs")
    else:
        values = _vector(params["p"], "$.params.p", 0.0, 1.0)
        if kind == "pairwise":
            raw_pairs = params["pairs"]
            if not isinstance(raw_pairs, list):
                raise ConfigError("expected a list of [i, j, p_ij]", "$.params.pairs")
            pairs = {}
            for t, item in enumerate(raw_pairs):
                path = f"$.params.pairs[{t}]"
                if not (isinstance(item, list) and len(item) == 3):
                    raise ConfigError("expected [i, j, p_ij]", path)
                i, j = item[0], item[1]
                if not all(isinstance(v, int) and not isinstance(v, bool) and 0 <= v < values.size for v in (i, j)) or i == j:
                    raise ConfigError("indices must be distinct integers in range", path)
                pairs[(min(i, j), max(i, j))] = _number(item[2], f"{path}[2]", 0.0, 1.0)

    n = probs.ndim if probs is not None else values.size
    A = None
    if "neighborhoods" in raw:
        if kind in ("bernoulli", "geometric"):
            raise ConfigError("independent kinds take no neighborhoods", "$.neighborhoods")
        A = _neighborhoods(raw["neighborhoods"], n, "$.neighborhoods")

    nb = raw.get("nb", {})
    if not isinstance(nb, dict):
        raise ConfigError("expected an object", "$.nb")
    _unknown(nb, NB_KEYS, "$.nb")
    mode = nb.get("mode", "mean")
    if mode not in MODES:
        raise ConfigError(f"must be one of {list(MODES)}", "$.nb.mode")
    r = _number(nb["r"], "$.nb.r", 0.0) if "r" in nb else None
    p = _number(nb["p"], "$.nb.p", 0.0, 1.0) if "p" in nb else None
    if mode == "explicit" and (r is None or p is None):
        raise ConfigError("explicit mode needs both r and p", "$.nb")
    if mode == "meanvar" and (r is not None or p is not None):
        raise ConfigError("meanvar mode determines r and p; do not set them", "$.nb")
    if mode == "mean" and p is not None:
        raise ConfigError("mean mode takes r only (p is matched)", "$.nb.p")

    z_grid = None
    if "z_grid" in raw:
        z_grid = tuple(_vector(raw["z_grid"], "$.z_grid", 0.0, math.inf))

    tranches = []
    for t, item in enumerate(raw.get("tranches", [])):
        path = f"$.tranches[{t}]"
        if not (isinstance(item, list) and len(item) == 2):
            raise ConfigError("expected [attachment, detachment]", path)
        a, d = _number(item[0], f"{path}[0]", 0.0, 1.0), _number(item[1], f"{path}[1]", 0.0, 1.0)
        if not a < d:
            raise ConfigError("attachment must be below detachment", path)
        tranches.append((a, d))
    recovery = _number(raw.get("recovery", 0.4), "$.recovery", 0.0, 1.0)
    desc = raw.get("description", "")
    if not isinstance(desc, str):
        raise ConfigError("expected a string", "$.description")

    cfg = RunConfig(kind, values, pairs, probs, A, mode, r, p, z_grid, tuple(tranches), recovery, desc)
    try:
        cfg.model()   # surfaces inconsistent pairs/neighbourhoods now rather than mid-run
    except NBSteinError as e:
        raise ConfigError(str(e), "$.params") from e
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read: {e.strerror}", str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", str(path)) from e
    return parse_config(raw)


SHIPPED = ("bernoulli_5", "cdo_chain_12", "cdo_independent_10", "cdo_large_75_chain",
           "cdo_large_75_independent", "geometric_iid_10", "geometric_table1_20")


def shipped_config(name: str) -> Path:
    """Path of a config bundled with the package, by stem (``"cdo_chain_12"``)."""
    if name not in SHIPPED:
        raise ConfigError(f"no shipped config {name!r}; have {list(SHIPPED)}", "name")
    return Path(str(resources.files("nbstein") / "configs" / f"{name}.json"))
