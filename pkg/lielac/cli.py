"""
Command line entry points: group and bracket verification suites and the canonicalization experiments.

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 canonicalization failure.
"""
import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from ._constants import get_default
from ._errors import CanonicalizationFailed, ConfigError, NoFiniteStart, NotPeriodic
from .energy import EnergyConfig, ProblemInstance, e_ace
from .fields import (
    Field1D,
    GrfParams,
    QueryWindow,
    SineICParams,
    fields_to_dataset,
    gen_ace_ic,
    gen_grf_ic,
    gen_sine_ic,
    sample_ace_ic_params,
    transform_ic_ace,
    write_field_csv,
)
from .groups import (
    AceElement,
    Se2Element,
    as_params,
    compose,
    identity,
    inverse,
    random_element,
)
from .jets import JetPoint, JetPoint2D, bracket_table, point_action
from .optim import OptimConfig, alg1_global_retraction, alg2_lie_descent, alg3_coordinate_descent
from .pipeline import (
    ace_canonicalizer,
    ace_operator,
    burgers_canonicalizer,
    burgers_operator,
    equivariant_apply,
    heat_canonicalizer,
    heat_operator,
    rel_l2_error,
)
from .solvers import AceConfig, HeatConfig, burgers_rk4_solve, heat_spectral_solve
from .toy2d import (
    canonicalize_points,
    canonicalize_training,
    decision_boundary_grid,
    default_bandwidth,
    rotation_accuracy,
    sample_ring_mixture,
)

__all__ = ['main', 'dumps_results', 'load_config']

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_CANON_FAILED = 3

HEAT_ALGORITHMS = {'frame': None, 'alg1': alg1_global_retraction, 'alg2': alg2_lie_descent,
                   'alg3': alg3_coordinate_descent}

CONFIG_DEFAULTS = {
    'check-group': {'group': 'heat', 'n_samples': 1000, 'n_jets': 100, 'element_scale': 0.5, 'jet_scale': 0.2,
                    'nu': None, 'seed': 0, 'axiom_tol': 1e-10, 'tol': 1e-9},
    'check-brackets': {'group': 'heat', 'eps': 1e-2, 'nu': None, 'point': [0.5, 0.5, 1.0], 'rel_tol': 0.05,
                       'zero_tol': 1e-3},
    'canon-heat': {'amplitudes': [5.0], 'n': None, 'nu': None, 'horizon': None, 'times': None, 'random_phase': False,
                   'seed': 0, 'tol': 1e-2, 'algorithm': 'frame', 'optim': {},
                   'energy': {}},
    'canon-burgers': {'mean_shift': 0.2, 'seeds': [0], 'n': None, 'nu': None, 'times': None, 'reference_factor': 4,
                      'grf': {}, 'seed': 0, 'tol': 2e-2, 'optim': {}, 'energy': {}},
    'canon-ace': {'n': None, 'seeds': [0], 'shifted': True, 'n_group_samples': 8, 'times': None, 'epsilon': None,
                  'dt': None, 'angle': 0.0, 'seed': 0, 'tol': 1e-12},
    'canon-2d': {'n_per_ring': 100, 'radii': [1.0, 2.0], 'noise_std': 0.05, 'n_modes': 3, 'angular_std': 0.25,
                 'n_test': 200, 'k': 5, 'n_angles': 8, 'bandwidth': None, 'lattice_size': 41, 'extent': 3.0,
                 'seed': 0, 'tol': 0.98},
}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps_results(results: dict) -> str:
    """
    JSON text of a results dict

    Floats are written in their shortest round-trip form (at most 17 significant digits), so they read back
    bit-identical. Non-finite floats become null and numpy scalars and arrays become plain JSON values.
    """
    return json.dumps(_plain(results), allow_nan=False)


def load_config(command: str, path: Optional[str], args: argparse.Namespace) -> dict:
    """
    Merges defaults, the JSON config file and command line flags, in increasing priority

    Raises:
        ConfigError: if the file cannot be read or holds unknown keys
    """
    config = dict(CONFIG_DEFAULTS[command])
    if path is not None:
        try:
            with open(path) as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f'Could not read config {path}: {e}') from e
        if not isinstance(loaded, dict):
            raise ConfigError('The run config must be a JSON object')
        unknown = set(loaded) - set(config)
        if unknown:
            raise ConfigError(f'Unknown config keys for {command}: {sorted(unknown)}')
        config.update(loaded)
    if args.seed is not None:
        config['seed'] = args.seed
    if args.tol is not None:
        config['tol'] = args.tol
    if getattr(args, 'group', None) is not None:
        config['group'] = args.group
    if getattr(args, 'n_samples', None) is not None:
        config['n_samples'] = args.n_samples
    config['threads'] = args.threads
    return config


def _optim_config(config: dict, **defaults) -> OptimConfig:
    options = dict(defaults)
    options.update(config.get('optim') or {})
    options.setdefault('threads', config['threads'])
    try:
        return OptimConfig(**options)
    except (TypeError, ValueError) as e:
        raise ConfigError(f'Invalid optim config: {e}') from e


def _energy_config(config: dict, kind: str) -> EnergyConfig:
    try:
        return EnergyConfig(kind, **(config.get('energy') or {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f'Invalid energy config: {e}') from e


def _write_results(out: Path, results: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / 'results.json'
    path.write_text(dumps_results(results) + '\n')
    return path


def _random_jet(group_id: str, rng: np.random.Generator):
    if group_id in ('heat', 'burgers'):
        return JetPoint(rng.uniform(0, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1.5))
    elif group_id == 'se2':
        return JetPoint2D(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1))
    return rng.uniform(-1, 1, 2)


def _param_error(a, b) -> float:
    return float(np.max(np.abs(as_params(a) - as_params(b))))


def cmd_check_group(config: dict) -> dict:
    """
    Group axioms on random elements and the action homomorphism on random jets

    The axioms are held to axiom_tol and the homomorphism to tol.
    """
    group_id = config['group']
    rng = np.random.default_rng(config['seed'])
    act = point_action(group_id, config['nu'])
    e = identity(group_id)
    errors = {'associativity': 0.0, 'identity': 0.0, 'inverse': 0.0, 'action_homomorphism': 0.0}
    for _ in range(config['n_samples']):
        a, b, c = (random_element(group_id, rng, config['element_scale']) for _ in range(3))
        errors['associativity'] = max(errors['associativity'],
                                      _param_error(compose(compose(a, b), c), compose(a, compose(b, c))))
        errors['identity'] = max(errors['identity'], _param_error(compose(e, a), a), _param_error(compose(a, e), a))
        errors['inverse'] = max(errors['inverse'], _param_error(compose(a, inverse(a)), e),
                                _param_error(compose(inverse(a), a), e))
    for _ in range(config['n_jets']):
        g1, g2 = (random_element(group_id, rng, config['jet_scale']) for _ in range(2))
        p = _random_jet(group_id, rng)
        direct = np.asarray(act(compose(g1, g2), p), dtype=float)
        chained = np.asarray(act(g1, act(g2, p)), dtype=float)
        scale = np.maximum(1.0, np.abs(chained))
        error = float(np.max(np.abs(direct - chained) / scale))
        errors['action_homomorphism'] = max(errors['action_homomorphism'], error)
    tols = {check: config['axiom_tol'] for check in errors}
    tols['action_homomorphism'] = config['tol']
    table = pd.DataFrame({'check': list(errors), 'max_error': list(errors.values()), 'tol': list(tols.values())})
    table['passed'] = table['max_error'] <= table['tol']
    return {'group': group_id, 'axiomTol': config['axiom_tol'], 'tol': config['tol'], 'table': table,
            'passed': bool(table['passed'].all())}


def cmd_check_brackets(config: dict) -> dict:
    """Commutator-of-flows estimates against the tabulated brackets"""
    table, sign = bracket_table(config['group'], config['eps'], config['nu'], JetPoint(*config['point']),
                                config['rel_tol'], config['zero_tol'])
    return {'group': config['group'], 'eps': config['eps'], 'sign': sign, 'table': table,
            'passed': bool(table['passed'].all())}


def cmd_canon_heat(config: dict, out: Path) -> dict:
    nu = get_default('heat_nu') if config['nu'] is None else config['nu']
    horizon = get_default('heat_horizon') if config['horizon'] is None else config['horizon']
    n = get_default('heat_n') if config['n'] is None else config['n']
    times = np.linspace(0.0, horizon, 17) if config['times'] is None else np.asarray(config['times'], dtype=float)
    length = get_default('heat_length')
    if config['algorithm'] not in HEAT_ALGORITHMS:
        raise ConfigError(f'Unknown heat algorithm {config["algorithm"]}, expected one of {sorted(HEAT_ALGORITHMS)}')
    cfg = _optim_config(config, n_steps=60, num_inits=8, init_scale=0.2, active=(3, 5))
    canonizer = heat_canonicalizer(cfg, nu, _energy_config(config, 'heat_domain'), HEAT_ALGORITHMS[config['algorithm']])
    operator = heat_operator(nu, horizon)
    rng = np.random.default_rng(config['seed'])
    runs = []
    for amplitude in config['amplitudes']:
        phase = float(rng.uniform(0, 2 * math.pi)) if config['random_phase'] else 0.0
        ic = gen_sine_ic(SineICParams((amplitude,), (2,), (phase,), length), n)
        inst = ProblemInstance(ic, QueryWindow(0.0, length, 0.0, horizon), 'heat')
        start = time.perf_counter()
        solutions, result = equivariant_apply(operator, canonizer, inst, times, nu)
        elapsed = time.perf_counter() - start
        direct = heat_spectral_solve(ic, HeatConfig(nu), times)
        errors = [rel_l2_error(a, b) for a, b in zip(solutions, direct)]
        tag = f'heat_A{amplitude:g}'
        write_field_csv(result.canonical.ic, out / f'{tag}_canonical_ic.csv')
        fields_to_dataset(solutions, 'df').to_csv(out / f'{tag}_pipeline.csv', index=False, float_format='%.17g')
        runs.append({
            'amplitude': amplitude,
            'finalEnergy': result.final_energy,
            'groupParams': as_params(result.g),
            'canonicalMaxAbsU': float(np.max(np.abs(result.canonical.ic.values))),
            'relL2_direct_vs_pipeline': float(np.mean(errors)),
            'timings': {'pipeline_s': elapsed},
        })
    passed = all(r['relL2_direct_vs_pipeline'] <= config['tol'] for r in runs)
    return {'seed': config['seed'], 'nu': nu, 'runs': runs, 'passed': passed}


def _refine(ic: Field1D, factor: int) -> Field1D:
    m = ic.n - 1
    u = np.fft.irfft(np.fft.rfft(ic.periodic_values), n=m * factor) * factor
    return Field1D(np.append(u, u[0]), ic.x_lo, ic.x_hi, ic.time, True)


def _coarsen(f: Field1D, factor: int) -> Field1D:
    return Field1D(f.values[::factor], f.x_lo, f.x_hi, f.time, f.periodic)


def cmd_canon_burgers(config: dict, out: Path) -> dict:
    nu = get_default('burgers_nu') if config['nu'] is None else config['nu']
    n = get_default('burgers_n') if config['n'] is None else config['n']
    horizon = get_default('burgers_horizon')
    times = np.linspace(0.0, horizon, 11) if config['times'] is None else np.asarray(config['times'], dtype=float)
    factor = int(config['reference_factor'])
    try:
        grf_params = GrfParams(**{**(config['grf'] or {}), 'mean_offset': config['mean_shift']})
    except (TypeError, ValueError) as e:
        raise ConfigError(f'Invalid grf config: {e}') from e
    canonizer = burgers_canonicalizer(_optim_config(config, n_steps=60), _energy_config(config, 'burgers_domain'))
    operator = burgers_operator(nu, horizon)
    runs = []
    for seed in config['seeds']:
        ic = gen_grf_ic(grf_params, n, seed)
        inst = ProblemInstance(ic, QueryWindow(0.0, 1.0, 0.0, horizon), 'burgers')
        start = time.perf_counter()
        solutions, result = equivariant_apply(operator, canonizer, inst, times)
        elapsed = time.perf_counter() - start
        reference = [_coarsen(f, factor) for f in burgers_rk4_solve(_refine(ic, factor), nu, times)]
        errors = [rel_l2_error(a, b) for a, b in zip(solutions, reference)]
        tag = f'burgers_seed{seed}'
        write_field_csv(result.canonical.ic, out / f'{tag}_canonical_ic.csv')
        fields_to_dataset(solutions, 'df').to_csv(out / f'{tag}_pipeline.csv', index=False, float_format='%.17g')
        runs.append({
            'seed': seed,
            'finalEnergy': result.final_energy,
            'groupParams': as_params(result.g),
            'canonicalMean': result.canonical.ic.mean(),
            'relL2_direct_vs_pipeline': float(np.mean(errors)),
            'timings': {'pipeline_s': elapsed},
        })
    passed = all(r['relL2_direct_vs_pipeline'] <= config['tol'] for r in runs)
    return {'seed': config['seed'], 'nu': nu, 'meanShift': config['mean_shift'], 'runs': runs, 'passed': passed}


def _random_discrete_element(n: int, rng: np.random.Generator) -> AceElement:
    k, sx, sy = int(rng.integers(0, 4)), int(rng.integers(0, n)), int(rng.integers(0, n))
    return AceElement(Se2Element(k * math.pi / 2, sx / n, sy / n))


def cmd_canon_ace(config: dict, out: Path) -> dict:
    n = get_default('ace_n') if config['n'] is None else config['n']
    ace_cfg = AceConfig(config['epsilon'], config['dt'])
    times = [ace_cfg.dt * 10] if config['times'] is None else [float(t) for t in config['times']]
    canonizer = ace_canonicalizer()
    operator = ace_operator(ace_cfg)
    rng = np.random.default_rng(config['seed'])
    runs = []
    for seed in config['seeds']:
        params = sample_ace_ic_params(np.random.default_rng(seed), config['shifted'])
        ic = gen_ace_ic(params, n)
        ic = transform_ic_ace(AceElement(Se2Element(config['angle'])), ic) if config['angle'] else ic
        inst = ProblemInstance(ic, QueryWindow(0.0, 1.0, 0.0, 1.0), 'se2')
        start = time.perf_counter()
        solutions, result = equivariant_apply(operator, canonizer, inst, times)
        elapsed = time.perf_counter() - start
        invariant, max_frame_error = True, 0.0
        for _ in range(config['n_group_samples']):
            g = _random_discrete_element(n, rng)
            moved = ProblemInstance(transform_ic_ace(g, ic), inst.query, 'se2')
            moved_solutions, moved_result = equivariant_apply(operator, canonizer, moved, times)
            invariant &= np.array_equal(moved_result.canonical.ic.values, result.canonical.ic.values)
            for a, b in zip(moved_solutions, solutions):
                max_frame_error = max(max_frame_error, rel_l2_error(a, transform_ic_ace(g, b)))
        tag = f'ace_seed{seed}'
        write_field_csv(result.canonical.ic, out / f'{tag}_canonical_ic.csv')
        runs.append({
            'seed': seed,
            'finalEnergy': result.final_energy,
            'startEnergy': e_ace(inst),
            'groupParams': as_params(result.g),
            'canonicalInvariant': bool(invariant),
            'relL2_frame_aligned': max_frame_error,
            'timings': {'pipeline_s': elapsed},
        })
    passed = all(r['canonicalInvariant'] and r['relL2_frame_aligned'] <= config['tol'] for r in runs)
    return {'seed': config['seed'], 'runs': runs, 'passed': passed}


def cmd_canon_2d(config: dict, out: Path) -> dict:
    seed = config['seed']
    train = sample_ring_mixture(config['n_per_ring'], config['radii'], config['noise_std'], seed,
                                config['n_modes'], config['angular_std'])
    test = sample_ring_mixture(config['n_test'] // len(config['radii']), config['radii'], config['noise_std'],
                               seed + 1, config['n_modes'], config['angular_std'])
    h = default_bandwidth(train.points) if config['bandwidth'] is None else config['bandwidth']
    threads = config['threads']

    def canonicalize(points):
        return canonicalize_points(train.points, h, points, threads=threads)

    angles = 2 * math.pi * np.arange(config['n_angles']) / config['n_angles']
    start = time.perf_counter()
    canon_train = canonicalize_training(train, canonicalize)
    summary = rotation_accuracy(train, test, config['k'], angles, canonicalize, canon_train)
    axis = np.linspace(-config['extent'], config['extent'], config['lattice_size'])
    boundary = decision_boundary_grid(train, config['k'], (axis, axis), canonicalize, canon_train)
    elapsed = time.perf_counter() - start
    boundary.to_csv(out / 'decision_boundary.csv', index=False, float_format='%.17g')
    summary.reset_index().to_csv(out / 'rotation_accuracy.csv', index=False, float_format='%.17g')
    # share of all (point, rotation) pairs
    agreement = float(summary['agreement_canon'].mean())
    return {
        'seed': seed,
        'bandwidth': h,
        'accuracyRaw': summary['accuracy_raw'].to_numpy(),
        'accuracyCanon': summary['accuracy_canon'].to_numpy(),
        'agreementCanon': agreement,
        'minAgreementCanon': float(summary['agreement_canon'].min()),
        'timings': {'total_s': elapsed},
        'passed': agreement >= config['tol'],
    }


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='JSON run config')
    common.add_argument('--out', type=str, default='lielac_out', help='Output directory')
    common.add_argument('--seed', type=int, default=None, help='Overrides the config seed')
    common.add_argument('--threads', type=int, default=1, help='Worker threads for multi-init runs')
    common.add_argument('--tol', type=float, default=None, help='Overrides the pass tolerance')
    common.add_argument('--verbose', '-v', action='count', default=0, help='-v for info, -vv for debug logs')

    parser = argparse.ArgumentParser(prog='lielac', description='Lie algebra canonicalization for PDE operators')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in ('check-group', 'check-brackets'):
        p = sub.add_parser(name, parents=[common])
        choices = ('heat', 'burgers', 'se2', 'so2') if name == 'check-group' else ('heat', 'burgers')
        p.add_argument('--group', choices=choices, default=None)
        if name == 'check-group':
            p.add_argument('--n-samples', type=int, default=None, help='Random element triples to test')
    for name in ('canon-heat', 'canon-burgers', 'canon-ace', 'canon-2d'):
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG_ERROR if e.code else EXIT_PASS
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose == 1 else logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s')
    out = Path(args.out)

    try:
        if args.threads < 1:
            raise ConfigError('--threads must be at least 1')
        config = load_config(args.command, args.config, args)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == 'check-group':
            results = cmd_check_group(config)
        elif args.command == 'check-brackets':
            results = cmd_check_brackets(config)
        elif args.command == 'canon-heat':
            results = cmd_canon_heat(config, out)
        elif args.command == 'canon-burgers':
            results = cmd_canon_burgers(config, out)
        elif args.command == 'canon-ace':
            results = cmd_canon_ace(config, out)
        else:
            results = cmd_canon_2d(config, out)
    except ConfigError as e:
        print(f'config error: {e}', file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (CanonicalizationFailed, NoFiniteStart, NotPeriodic) as e:
        print(f'canonicalization failed: {e}', file=sys.stderr)
        _write_results(out, {'command': args.command, 'passed': False, 'error': str(e)})
        return EXIT_CANON_FAILED

    table = results.pop('table', None)
    if table is not None:
        print(table.to_string(index=False))
        table.to_csv(out / f'{args.command}.csv', index=False, float_format='%.17g')
        results['checks'] = table.to_dict(orient='records')
    results['command'] = args.command
    _write_results(out, results)
    print(f'{args.command}: {"PASS" if results["passed"] else "FAIL"}')
    return EXIT_PASS if results['passed'] else EXIT_CHECK_FAILED
