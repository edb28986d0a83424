"""Kernel spec files: a flat JSON document describing one kernel.

Schema (all other top-level keys are a hard error)::

    {
      "schema_version": 1,            # optional, must be 1 if present
      "name": "...",                  # optional
      "domain": [lower, upper],       # required except for explicit_matrix
      "measure": "lebesgue"           # or {"name": "lebesgue_scaled", "scale": c}
      "family": "affine_uniform" | "cubic_uniform" | "gaussian_shift"
                | "tabulated" | "explicit_matrix",
      "params": {...},                # family parameters; matrices as nested lists
      "grid_size": N,                 # required for density families
      "quadrature": "trapezoid"       # optional: or "ulam"
    }
"""

import json

from .errors import SchemaError
from .kernels import ALL_FAMILIES, KernelSpec

_ALLOWED_KEYS = {"schema_version", "name", "domain", "measure", "family",
                 "params", "grid_size", "quadrature"}

_FAMILY_PARAMS = {
    "affine_uniform": {"a", "b", "noise_halfwidth"},
    "cubic_uniform": {"noise_halfwidth"},
    "gaussian_shift": {"sigma", "indicator_region"},
    "tabulated": {"values"},
    "explicit_matrix": {"matrix", "labels"},
}


def spec_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("spec document must be a JSON object")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise SchemaError(f"unknown fields {sorted(unknown)}")
    if doc.get("schema_version", 1) != 1:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')}")
    family = doc.get("family")
    if family not in ALL_FAMILIES:
        raise SchemaError(f"family must be one of {ALL_FAMILIES}, got {family!r}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params must be an object")
    bad = set(params) - _FAMILY_PARAMS[family]
    if bad:
        raise SchemaError(f"unknown params {sorted(bad)} for family {family}")

    measure = doc.get("measure", "lebesgue")
    scale = 1.0
    if isinstance(measure, dict):
        if set(measure) != {"name", "scale"} or measure["name"] != "lebesgue_scaled":
            raise SchemaError(f"bad measure object {measure}")
        scale = float(measure["scale"])
        measure = "lebesgue_scaled"
    elif measure != "lebesgue":
        raise SchemaError(f"unknown measure {measure!r}")

    if family == "explicit_matrix":
        if "matrix" not in params:
            raise SchemaError("explicit_matrix needs params.matrix")
        n = len(params["matrix"])
        domain = (0.0, float(max(n - 1, 1)))
        grid_size = n
    else:
        if "domain" not in doc:
            raise SchemaError("domain is required")
        domain = doc["domain"]
        if not (isinstance(domain, (list, tuple)) and len(domain) == 2):
            raise SchemaError("domain must be [lower, upper]")
        domain = (float(domain[0]), float(domain[1]))
        if "grid_size" not in doc:
            raise SchemaError("grid_size is required")
        grid_size = int(doc["grid_size"])

    try:
        return KernelSpec(domain=domain, family=family, params=params,
                          grid_size=grid_size, measure=measure, measure_scale=scale,
                          quadrature=doc.get("quadrature", "trapezoid"),
                          name=doc.get("name"))
    except Exception as exc:
        raise SchemaError(str(exc)) from exc


def spec_to_dict(spec):
    doc = {
        "schema_version": 1,
        "family": spec.family,
        "params": spec.params,
    }
    if spec.name:
        doc["name"] = spec.name
    if not spec.is_explicit:
        doc["domain"] = [spec.domain[0], spec.domain[1]]
        doc["grid_size"] = spec.grid_size
        if spec.quadrature != "trapezoid":
            doc["quadrature"] = spec.quadrature
    if spec.measure == "lebesgue_scaled":
        doc["measure"] = {"name": "lebesgue_scaled", "scale": spec.measure_scale}
    return doc


def load_spec(path):
    try:
        with open(path) as fp:
            doc = json.load(fp)
    except FileNotFoundError:
        raise SchemaError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"spec file is not valid JSON: {exc}")
    return spec_from_dict(doc)


def dump_spec(spec, path):
    with open(path, "w") as fp:
        json.dump(spec_to_dict(spec), fp, indent=2, sort_keys=True)
        fp.write("\n")
