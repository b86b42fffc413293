#!/usr/bin/env python3
"""Validate emitted JSON documents against the schemas in schemas/.

Usage: validate_json.py PATH [PATH ...]

Each PATH is a JSON file or a directory (searched for known artifact names).
The schema is chosen from the file name; unknown names are an error.
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMA_DIR = pathlib.Path(__file__).resolve().parent.parent / "schemas"
SCHEMA_FOR = {
    "model.json": "model.schema.json",
    "fit_report.json": "fit_report.schema.json",
    "selection.json": "selection.schema.json",
    "dependency_matrix.json": "dependency_matrix.schema.json",
    "comparison.json": "comparison.schema.json",
    "synth_truth.json": "synth_truth.schema.json",
}


def load_registry():
    resources = []
    for path in SCHEMA_DIR.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def targets(paths):
    for p in map(pathlib.Path, paths):
        if p.is_dir():
            found = [p / name for name in SCHEMA_FOR if (p / name).exists()]
            if not found:
                raise SystemExit(f"no known JSON artifacts in {p}")
            yield from found
        else:
            yield p


def main(argv):
    if not argv:
        print(__doc__, file=sys.stderr)
        return 2
    registry = load_registry()
    failures = 0
    for path in targets(argv):
        name = SCHEMA_FOR.get(path.name)
        if name is None:
            print(f"FAIL {path}: no schema for this file name")
            failures += 1
            continue
        schema = json.loads((SCHEMA_DIR / name).read_text())
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        errors = sorted(validator.iter_errors(json.loads(path.read_text())), key=lambda e: list(e.path))
        if errors:
            failures += 1
            for e in errors[:5]:
                print(f"FAIL {path}: {'/'.join(map(str, e.path))}: {e.message}")
        else:
            print(f"ok   {path}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
