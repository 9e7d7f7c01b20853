"""JSON system descriptions.

Layout::

    {
      "name": "...",                       optional
      "dims": {"d": 2, "m": 1, "p_out": 1},
      "subsystems": [
        {"id": 1, "stable": true, "lambda": 3.5, "delta": 3.5, "Delta": 4,
         "f": ["..."], "h": ["..."], "V": "..."}
      ],
      "edges": [{"from": 1, "to": 2, "mu": 1.0}],
      "defaults": {"tolerance": 1e-9, "rk_step": 1e-3, "seed": 0}   optional
    }

``lambda`` is the magnitude |lambda_p|; ``stable`` picks the sign.  ``f``,
``h`` and ``V`` may be omitted for graph-only descriptions.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

from .expr import ExprError
from .model import Defaults, Dims, EdgeSpec, SpecError, SubsystemSpec, SystemSpec, input_vars, parse_vector, state_vars, validate

BUNDLED = ("sec5.json", "sec5_delta2_17.json", "sec5_mu13.json")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("ioss_cert") / "examples" / name))


def resolve_path(path: str | Path) -> Path:
    """``path`` itself if it exists, else the bundled example of the same name."""
    p = Path(path)
    if not p.exists() and p.name in BUNDLED:
        return bundled_path(p.name)
    return p


def _get(obj: dict, key: str, path: str, kind=None, default: Any = ...):
    if key not in obj:
        if default is not ...:
            return default
        raise SpecError(f"{path}.{key}" if path else key, "missing")
    val = obj[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind in ((int, float), int):
        raise SpecError(f"{path}.{key}" if path else key, f"expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _exprs(raw, path: str, allowed: list[str]):
    if isinstance(raw, str):
        raw = [raw]
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise SpecError(path, "expected a list of expression strings")
    out = []
    for j, text in enumerate(raw):
        try:
            out.extend(parse_vector([text], allowed))
        except ExprError as exc:
            raise SpecError(f"{path}[{j}]", str(exc)) from None
    return tuple(out)


def spec_from_dict(data: dict) -> SystemSpec:
    """Build and validate a :class:`SystemSpec`; errors carry the field path."""
    if not isinstance(data, dict):
        raise SpecError("", "top level must be an object")
    num = (int, float)
    dims_raw = _get(data, "dims", "", dict)
    dims = Dims(
        _get(dims_raw, "d", "dims", int, 0),
        _get(dims_raw, "m", "dims", int, 0),
        _get(dims_raw, "p_out", "dims", int, 0),
    )
    xs, vs = state_vars(dims.d), input_vars(dims.m)
    subs = []
    raw_subs = _get(data, "subsystems", "", list)
    for i, s in enumerate(raw_subs):
        path = f"subsystems[{i}]"
        if not isinstance(s, dict):
            raise SpecError(path, "expected an object")
        sid = _get(s, "id", path)
        if not isinstance(sid, (int, str)) or isinstance(sid, bool):
            raise SpecError(f"{path}.id", "id must be an integer or a string")
        f = _exprs(s["f"], f"{path}.f", xs + vs) if "f" in s else ()
        h = _exprs(s["h"], f"{path}.h", xs) if "h" in s else ()
        V = None
        if "V" in s:
            if not isinstance(s["V"], str):
                raise SpecError(f"{path}.V", "expected an expression string")
            V = _exprs([s["V"]], f"{path}.V", xs)[0]
        subs.append(
            SubsystemSpec(
                sid,
                _get(s, "stable", path, bool),
                float(_get(s, "lambda", path, num)),
                float(_get(s, "delta", path, num)),
                float(_get(s, "Delta", path, num)),
                f,
                h,
                V,
            )
        )
    edges = []
    for k, e in enumerate(_get(data, "edges", "", list, [])):
        path = f"edges[{k}]"
        if not isinstance(e, dict):
            raise SpecError(path, "expected an object")
        edges.append(EdgeSpec(_get(e, "from", path), _get(e, "to", path), float(_get(e, "mu", path, num))))
    d_raw = _get(data, "defaults", "", dict, {})
    defaults = Defaults(
        float(_get(d_raw, "tolerance", "defaults", num, 1e-9)),
        float(_get(d_raw, "rk_step", "defaults", num, 1e-3)),
        _get(d_raw, "seed", "defaults", int, 0),
    )
    name = _get(data, "name", "", str, "system")
    return validate(SystemSpec(dims, tuple(subs), tuple(edges), defaults, name))


def load_spec(path: str | Path) -> SystemSpec:
    """Read, parse and validate a JSON system description.

    Raises
    ------
    FileNotFoundError
        If neither ``path`` nor a bundled example of that name exists.
    SpecError
        On malformed JSON or any invariant violation, with the field path.
    """
    p = resolve_path(path)
    text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{p.name}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return spec_from_dict(data)


def spec_to_dict(spec: SystemSpec) -> dict:
    """Inverse of :func:`spec_from_dict` (expressions are pretty-printed)."""
    from .expr import to_string

    subs = []
    for s in spec.subsystems:
        d: dict[str, Any] = {"id": s.id, "stable": s.stable, "lambda": s.lambda_abs, "delta": s.delta, "Delta": s.Delta}
        if s.dynamics:
            d["f"] = [to_string(e) for e in s.dynamics]
        if s.output:
            d["h"] = [to_string(e) for e in s.output]
        if s.lyapunov is not None:
            d["V"] = to_string(s.lyapunov)
        subs.append(d)
    return {
        "name": spec.name,
        "dims": {"d": spec.dims.d, "m": spec.dims.m, "p_out": spec.dims.p_out},
        "subsystems": subs,
        "edges": [{"from": e.src, "to": e.dst, "mu": e.mu} for e in spec.edges],
        "defaults": {"tolerance": spec.defaults.tolerance, "rk_step": spec.defaults.rk_step, "seed": spec.defaults.seed},
    }


__all__ = ["load_spec", "spec_from_dict", "spec_to_dict", "resolve_path", "bundled_path", "BUNDLED"]
