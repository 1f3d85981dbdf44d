"""Validates configs and run summaries against the published JSON schemas."""
import json
import sys
from pathlib import Path

import jsonschema
from referencing import Registry, Resource


def load(path):
    with open(path) as f:
        return json.load(f)


def main(root, summaries):
    root = Path(root)
    scenario = load(root / "schemas" / "scenario.schema.json")
    summary = load(root / "schemas" / "summary.schema.json")
    registry = Registry().with_resources(
        [(s["$id"], Resource.from_contents(s)) for s in (scenario, summary)]
    )
    for s in (scenario, summary):
        jsonschema.Draft202012Validator.check_schema(s)
    failures = 0
    targets = [(p, scenario) for p in sorted((root / "configs").glob("*.json"))]
    targets += [(Path(p), summary) for p in summaries]
    for path, schema in targets:
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        errors = list(validator.iter_errors(load(path)))
        for e in errors:
            print(f"{path}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)
        print(f"{path.name}: {'ok' if not errors else 'INVALID'}")
    bad = dict(load(root / "configs" / "free.json"), t_max_typo=1)
    if jsonschema.Draft202012Validator(scenario, registry=registry).is_valid(bad):
        print("schema accepts unknown keys")
        failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2:]))
