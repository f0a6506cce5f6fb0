import json

import numpy as np
import pytest

from dualdiv import (CandidateValue, CostFunction, JumpLaw, ModelParams, apply_generator,
                     solve_vb_ode, verify_hjb)
from dualdiv.errors import DomainError

from conftest import BETA_STAR_C2


@pytest.fixture(scope="module")
def optimum(base_params):
    return CandidateValue.from_solution(solve_vb_ode(base_params, BETA_STAR_C2))


def test_identity_candidate_generator(base_params):
    m = CandidateValue.identity()
    xs = np.array([0.5, 3.0, 40.0])
    expected = -base_params.cost(xs) + base_params.mean_income_rate - base_params.q * xs
    assert np.allclose(apply_generator(base_params, m, xs, discounted=True), expected, atol=1e-12)


def test_zero_candidate_generator(base_params):
    m = CandidateValue.zero(20.0)
    xs = np.linspace(0.5, 19.5, 7)
    assert np.all(np.asarray(apply_generator(base_params, m, xs)) == 0.0)
    assert apply_generator(base_params, m, 25.0) == 0.0


def test_rejects_nonpositive_levels(base_params, optimum):
    with pytest.raises(DomainError):
        apply_generator(base_params, optimum, 0.0)


def test_barrier_value_solves_equation(base_params, optimum):
    xs = optimum.nodes[1:-1:10]
    r = np.asarray(apply_generator(base_params, optimum, xs, discounted=True))
    assert np.max(np.abs(r)) <= 1e-4 * optimum.scale


def test_generator_residual_second_order(base_params):
    # Nystrom-free check: only the quadrature grid of the candidate changes
    x = 10.0
    res = []
    ns = (100, 200, 400)
    for n in ns:
        s = solve_vb_ode(base_params, 30.0, h=30.0 / n)
        res.append(abs(apply_generator(base_params, CandidateValue.from_solution(s), x, True)))
    order = np.polyfit(np.log(ns), np.log(res), 1)[0]
    assert order <= -1.8


def test_optimum_passes(base_params, optimum):
    rep = verify_hjb(base_params, optimum, tol=1e-3)
    assert rep.supersolution and rep.complementarity and rep.passed
    assert rep.witness is None


def test_complementarity_at_optimum(base_params, optimum):
    x = optimum.beta
    r1 = apply_generator(base_params, optimum, x, True)
    r2 = 1 - optimum.derivative(x)
    assert abs(r1) <= 1e-4 * optimum.scale and abs(r2) <= 1e-5


@pytest.mark.parametrize("shift", [5.0, -5.0])
def test_shifted_barrier_fails_with_witness(base_params, shift):
    m = CandidateValue.from_solution(solve_vb_ode(base_params, BETA_STAR_C2 + shift))
    rep = verify_hjb(base_params, m, tol=1e-3)
    assert not rep.supersolution
    assert rep.witness is not None and rep.witness > 0
    i = int(np.argmin(np.abs(rep.nodes - rep.witness)))
    assert max(rep.r1[i] / (rep.tol * rep.scale), rep.r2[i] / rep.tol) > 1


def test_identity_passes_under_zero_barrier_condition():
    p = ModelParams(0.1, 0.1, CostFunction("const", 10.0), JumpLaw.exponential(0.01))
    rep = verify_hjb(p, CandidateValue.identity())
    assert rep.passed
    assert np.all(rep.r1 <= 0) and np.all(rep.r2 == 0)


def test_report_is_deterministic(tmp_path, base_params, optimum):
    a = verify_hjb(base_params, optimum)
    b = verify_hjb(base_params, optimum)
    a.write(tmp_path / "a.json")
    b.write(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["passed"]


def test_candidate_invariants():
    with pytest.raises(DomainError):
        CandidateValue(2.0, np.linspace(0, 1, 5), np.zeros(5), np.zeros(5))
    with pytest.raises(DomainError):
        CandidateValue(1.0, np.linspace(0, 1, 5), np.ones(5), np.zeros(5))
