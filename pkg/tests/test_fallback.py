import json
import os
import subprocess
import sys

import numpy as np
import pytest

from maxdde import USING_JIT, integrate, preset
from maxdde.return_map import eval_R

SCRIPT = """
import json
from maxdde import USING_JIT, integrate, preset
from maxdde.return_map import eval_R
prob = preset("ex2")
r = integrate(prob, 1.5, 12.0, prob.params.h / 400)
s = eval_R(prob, 0.0, dt=prob.params.h / 400)
print(json.dumps({"jit": USING_JIT, "values": r.values[::37].tolist(), "R": s.R}))
"""


def run_child(disable):
    env = dict(os.environ)
    env["MAXDDE_DISABLE_JIT"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                         text=True, check=True, timeout=600)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_fallback_matches_jit():
    pure = run_child(True)
    assert pure["jit"] is False
    prob = preset("ex2")
    r = integrate(prob, 1.5, 12.0, prob.params.h / 400)
    assert np.allclose(pure["values"], r.values[::37], rtol=0, atol=1e-12)
    assert pure["R"] == pytest.approx(eval_R(prob, 0.0, dt=prob.params.h / 400).R, abs=1e-12)


def test_env_flag_enables_jit():
    assert run_child(False)["jit"] is USING_JIT


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "maxdde.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("simulate", "return-map", "analyze", "certify", "appendix-verify"):
        assert name in out.stdout
