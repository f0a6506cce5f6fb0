"""Checking the optimal barrier two independent ways.

First simulate the controlled surplus and compare the average discounted
dividends with the analytic value. Then apply the generator to v_{beta*}
and check the variational inequality; moving the barrier by 5 either way
breaks it.
"""
from dualdiv import (CandidateValue, SimConfig, estimate_value, find_beta_star, solve_vb_ode,
                     table1_params, verify_hjb)

params = table1_params()
beta = find_beta_star(params).beta_star
sol = solve_vb_ode(params, beta)
print(f"beta* = {beta:.4f}")

for x0 in (beta / 4, beta / 2, beta, beta + 10):
    est = estimate_value(params, beta, x0, SimConfig(n_paths=100_000, seed=1))
    z = (est.mean - sol.value(x0)) / est.stderr
    print(f"x0={x0:7.3f}  simulated {est.mean:9.4f} +- {1.96 * est.stderr:.4f}   "
          f"analytic {sol.value(x0):9.4f}   z={z:+.2f}")

for shift in (0.0, 5.0, -5.0):
    m = CandidateValue.from_solution(solve_vb_ode(params, beta + shift))
    rep = verify_hjb(params, m, tol=1e-3)
    where = "" if rep.witness is None else f", worst node x={rep.witness:.3f}"
    print(f"barrier beta*{shift:+.0f}: supersolution {rep.supersolution}{where}")
