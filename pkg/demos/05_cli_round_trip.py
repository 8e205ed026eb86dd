"""The command line, driven from Python.

Writes a problem file, runs a search, re-verifies the stored result and
shows that tampering is detected.  Same as running ``flexbeam ...`` in a
shell.
"""
import contextlib
import io
import json
import tempfile
from pathlib import Path

from flexbeam.cli import main

SPEC = """\
[problem]
kind = E1

[params]
mu = 200
alpha = 0.012
beta = 0.01

[datum]
w = 0.3*sqrt((x-0.2)**2+0.0025)

[mesh]
n = 16

[search]
k_max = 2

[output]
name = kink
"""

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "kink.ini").write_text(SPEC)
    main(["search", "--spec", str(tmp / "kink.ini"), "--out", str(tmp)])
    doc = json.loads((tmp / "kink.json").read_text())
    print("breaks:", doc["breaks"], "certificate:", doc["search"]["certificate"])
    print("first CSV rows:", (tmp / "kink.csv").read_text().splitlines()[:3])

    def verify(path):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(["verify", str(path)])
        rep = json.loads(buf.getvalue())
        print(f"verify exit {code}: energy diff {rep['energy_abs_diff']:.1e}, "
              f"stationarity {rep['stationarity_residual']:.1e}")

    verify(tmp / "kink.json")
    # a perturbed degree of freedom is reported, not rejected
    doc["solution"]["dofs_r"][10] += 1e-3
    (tmp / "kink.json").write_text(json.dumps(doc))
    verify(tmp / "kink.json")

    main(["poincare", "--n", "128"])
