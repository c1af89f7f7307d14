import copy

import pytest

from config import settings


@pytest.fixture(autouse=True)
def restore_settings():
    app = copy.deepcopy(settings.APP_SETTINGS)
    chain = copy.deepcopy(settings.MCMC_SETTINGS)
    yield
    settings.APP_SETTINGS.clear()
    settings.APP_SETTINGS.update(app)
    settings.MCMC_SETTINGS.clear()
    settings.MCMC_SETTINGS.update(chain)
