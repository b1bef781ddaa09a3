from . import configs, equilibrium, runs, settings, simulate

routers = [
    configs.router,
    equilibrium.router,
    simulate.router,
    runs.router,
    settings.router,
]

__all__ = [
    "routers",
    "configs",
    "equilibrium",
    "runs",
    "settings",
    "simulate",
]
