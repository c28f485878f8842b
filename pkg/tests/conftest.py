import pytest

from ranklab import _kernels

BACKENDS = sorted(_kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    mod = _kernels.available_backends()[request.param]
    for name in ("integrate", "log_post", "ascending_pairs"):
        monkeypatch.setattr(_kernels, name, getattr(mod, name))
    return request.param
