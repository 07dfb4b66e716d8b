import math
import os

SING_TOL = 1e-6
ENERGY_SENTINEL = 1e9
MIN_DOMAIN_LENGTH = 1e-9

default_values = {
    # group actions
    'sing_tol': SING_TOL,
    'min_domain_length': MIN_DOMAIN_LENGTH,
    # energies
    'energy_sentinel': ENERGY_SENTINEL,
    'constraint_tol': 1e-9,
    'periodic_tol': 1e-9,
    'kde_bandwidth_factor': 0.2,
    # heat problem
    'heat_nu': 0.1,
    'heat_length': 2 * math.pi,
    'heat_horizon': 16.0,
    'heat_n': 257,
    # burgers problem
    'burgers_nu': 0.01,
    'burgers_length': 1.0,
    'burgers_horizon': 1.0,
    'burgers_n': 257,
    'burgers_mean_tol': 1e-6,
    'burgers_rk4_dt': 1e-3,
    # allen-cahn problem
    'ace_n': 64,
    'ace_epsilon': 10.0,
    'ace_dt': 1e-3,
    'ace_max_reaction_step': 1.0,
    # optimizers and pipeline
    'fd_step': 1e-4,
    'accept_threshold': 1e-3,
}

env_keys = {
    'sing_tol': 'LIELAC_SING_TOL',
    'min_domain_length': 'LIELAC_MIN_DOMAIN_LENGTH',
    'energy_sentinel': 'LIELAC_ENERGY_SENTINEL',
    'constraint_tol': 'LIELAC_CONSTRAINT_TOL',
    'periodic_tol': 'LIELAC_PERIODIC_TOL',
    'kde_bandwidth_factor': 'LIELAC_KDE_BANDWIDTH_FACTOR',
    'heat_nu': 'LIELAC_HEAT_NU',
    'heat_length': 'LIELAC_HEAT_LENGTH',
    'heat_horizon': 'LIELAC_HEAT_HORIZON',
    'heat_n': 'LIELAC_HEAT_N',
    'burgers_nu': 'LIELAC_BURGERS_NU',
    'burgers_length': 'LIELAC_BURGERS_LENGTH',
    'burgers_horizon': 'LIELAC_BURGERS_HORIZON',
    'burgers_n': 'LIELAC_BURGERS_N',
    'burgers_mean_tol': 'LIELAC_BURGERS_MEAN_TOL',
    'burgers_rk4_dt': 'LIELAC_BURGERS_RK4_DT',
    'ace_n': 'LIELAC_ACE_N',
    'ace_epsilon': 'LIELAC_ACE_EPSILON',
    'ace_dt': 'LIELAC_ACE_DT',
    'ace_max_reaction_step': 'LIELAC_ACE_MAX_REACTION_STEP',
    'fd_step': 'LIELAC_FD_STEP',
    'accept_threshold': 'LIELAC_ACCEPT_THRESHOLD',
}


def get_default(name):
    try:
        default = default_values[name]
        value = os.getenv(env_keys[name])
    except KeyError:
        raise KeyError(f'Default {name} not found in default_values or env_keys')
    if value is None:
        return default
    return type(default)(value)


def set_default(name, value):
    if name not in env_keys:
        raise KeyError(f'Default {name} not found in env_keys')
    os.environ[env_keys[name]] = str(value)
    return
