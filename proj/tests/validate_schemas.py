"""Runs every shipped config through qet and validates configs and reports against schemas/."""
import json
import pathlib
import subprocess
import sys
import tempfile

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

qet, root = sys.argv[1], pathlib.Path(sys.argv[2])
config_schema = json.loads((root / "schemas/config.schema.json").read_text())
report_schema = json.loads((root / "schemas/report.schema.json").read_text())
registry = Registry().with_resources([("qet/config.schema.json", Resource.from_contents(config_schema))])
configs = Draft202012Validator(config_schema)
reports = Draft202012Validator(report_schema, registry=registry)

failed = 0
with tempfile.TemporaryDirectory() as tmp:
    for path in sorted((root / "configs").glob("*.json")):
        cfg = json.loads(path.read_text())
        errors = [e.message for e in configs.iter_errors(cfg)]
        out = pathlib.Path(tmp) / path.name
        rc = subprocess.run([qet, cfg["command"], "--config", str(path), "--override-hypotheses", "--out", str(out)],
                            capture_output=True).returncode
        if rc != 0:
            errors.append(f"exit code {rc}")
        else:
            errors += [e.message for e in reports.iter_errors(json.loads(out.read_text()))]
        print(path.name, "ok" if not errors else errors)
        failed += bool(errors)
sys.exit(1 if failed else 0)
