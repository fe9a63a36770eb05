import subprocess
import sys

import numpy as np
import pytest

from arrayqed import _kernels
from arrayqed.greens import K0


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
def test_coupling_kernels_agree():
    rng = np.random.default_rng(0)
    pos = rng.uniform(-1, 1, (40, 3))
    for pol in ([0, 0, 1], [1, 0, 0], [0.6, 0.8j, 0]):
        pol = np.asarray(pol, dtype=complex)
        a = _kernels.coupling_matrix_numpy(pos, pol, K0)
        b = _kernels.coupling_matrix_numba(pos, pol, K0)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_dispatch_matches_numpy():
    h = (0.01 - 0.005j, -0.004j, 0.002 + 0.0001j, 0.002 + 0.0001j)
    d = np.linspace(-0.02, 0.02, 7)
    t = np.linspace(0, 1e3, 7)
    a = _kernels.two_level_response(*h, d, t)
    b = _kernels.two_level_response_numpy(*h, d, t)
    assert np.allclose(a[0], b[0], rtol=1e-12) and np.allclose(a[1], b[1], rtol=1e-10, atol=1e-14)


def test_env_flag_selects_numpy():
    code = "from arrayqed import _kernels; print(_kernels.NUMBA_ENABLED)"
    env = {"ARRAYQED_DISABLE_NUMBA": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "False"
