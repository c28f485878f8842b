import os
import subprocess
import sys

import numpy as np
import pytest

from ranklab import _kernels
from ranklab.distributions import Normal, Pareto, QuarticErr, SuperLight, NormalErr
from ranklab.posterior import _Target

BACKENDS = _kernels.available_backends()


def test_python_fallback_always_available():
    assert "python" in BACKENDS


def test_env_forces_python_backend():
    env = {**os.environ, "RANKLAB_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import ranklab; print(ranklab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("prior,err", [(Normal(0.5, 2.0), NormalErr()), (Pareto(1, 4), QuarticErr()),
                                       (SuperLight(), NormalErr())])
def test_log_post_backends_agree(prior, err):
    tg = _Target(prior, err, 1.3, 0.4)
    args = (tg.code, tg.pa, tg.pb, tg.pc, tg.ecode, tg.ec, tg.x, tg.sigma)
    for theta in np.linspace(-4, 6, 41):
        vals = {k: m.log_post(*args, float(theta)) for k, m in BACKENDS.items()}
        ref = vals["python"]
        for v in vals.values():
            assert v == pytest.approx(ref, rel=1e-13, abs=1e-13) or (v == ref == -np.inf)


def test_ascending_pairs_edge_cases():
    for mod in BACKENDS.values():
        assert tuple(mod.ascending_pairs(np.array([], dtype=float))) == (0, 0.0)
        assert tuple(mod.ascending_pairs(np.array([2.0, 2.0, 2.0]))) == (0, 0.0)
        c, g = mod.ascending_pairs(np.array([1.0, 2.0, 3.0]))
        assert (c, g) == (3, 4.0)
