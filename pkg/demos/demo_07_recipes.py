"""
Figure recipes and the command line
===================================

Every figure has a recipe, a JSON config that the runner turns into CSV
files plus a manifest with checksums. The same recipe is available from the
shell as ``ridgeless-lab reproduce figD1 --scale desk``.
"""

import json
import tempfile

from ridgeless_lab.experiments import recipe_config, run_config

cfg = recipe_config("figD1", scale="desk", seed=0)
cfg["curves"][0]["estimator"]["reps"] = 200  # keep the demo quick
print(json.dumps(cfg["analytic"], indent=1))

with tempfile.TemporaryDirectory() as out:
    manifest = run_config(cfg, out, log=print)
    for name, digest in manifest["outputs"].items():
        print(f"{name:<28} {digest[:16]}")
