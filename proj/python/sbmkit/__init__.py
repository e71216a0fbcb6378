"""Bernstein functions, subordinator densities, kernels and Monte Carlo checks."""

import json as _json

from . import _core
from ._core import (
    BernsteinSpec,
    CertificationError,
    ConvergenceError,
    DomainError,
    Error,
    bhp_decay_comparator,
    capital_phi,
    capital_phi_inv,
    conjugate,
    family_names,
    free_heat_kernel,
    green_radial_g,
    half_space_hk_estimate,
    jump_density_j,
    ladder_exponent_chi,
    levy_density_mu,
    levy_tail,
    p_estimate,
    potential_density_u,
    renewal_V,
    rescale,
)


def spec(family, evaluator=None, normalize=True, **params):
    """BernsteinSpec from a family name and its parameters.

    Custom families take the evaluator name instead of parameters."""
    d = {"family": family, "normalize": normalize}
    if evaluator is not None:
        d["evaluator"] = evaluator
    if params:
        d["params"] = params
    return BernsteinSpec(_json.dumps(d))


def spec_to_dict(s):
    return _json.loads(s.to_json())


def certify(s, decades=8.0):
    return _json.loads(_core.certify(s, decades))


def mc_exit_ball(s, d, radius, n, dt=0.0, seed=1, workers=0):
    return _json.loads(_core.mc_exit_ball(s, d, radius, n, dt, seed, workers))


def run_suite(s, d, monte_carlo=False, inject_wrong_exponent=False, workers=0):
    return _json.loads(_core.run_suite(s, d, monte_carlo, inject_wrong_exponent, workers))
