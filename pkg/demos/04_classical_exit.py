"""Exit functions of the mirrored classical model.

Mapping the dual surplus x to beta - x turns dividends at the barrier into
capital injections at zero for a classical risk process with premium
p(beta - y). We compute W, G, Z and the expected injections, compare the
Laplace transform of the exit time with simulation, and replay a few dual
paths as classical ones.
"""
from dualdiv import (ClassicalModel, SimConfig, exit_functions, laplace_exit_reflected,
                     simulate_classical_exit, table1_params)
from dualdiv.simulator import simulate_classical_paths, simulate_paths

params = table1_params()
beta = 32.0
cm = ClassicalModel.from_dual(params, beta)
ef = exit_functions(cm, beta / 2000)
print(f"G1(0) = {ef.G1.values[0]:.6f}, gtilde(0) = {ef.gtilde.values[0]:.4f}, Z(0) = {ef.Z.values[0]}")

for x, a in ((0.0, beta), (16.0, beta), (5.0, 20.0)):
    sim = simulate_classical_exit(cm, x, a, SimConfig(50_000, seed=3))["laplace"]
    print(f"E_x[exp(-q T_a)]  x={x:5.1f} a={a:5.1f}:  Z(x)/Z(a) = {laplace_exit_reflected(ef, x, a):.5f}"
          f"   simulated {sim.mean:.5f} +- {1.96 * sim.stderr:.5f}")

cfg = SimConfig(200, seed=11)
dual = simulate_paths(params, beta, 28.0, cfg)
cls = simulate_classical_paths(cm, beta - 28.0, beta, cfg)
busy = [(d, c) for d, c in zip(dual, cls) if d.events][:5]
for d, c in busy:
    print(f"{len(d.events)} dividends / {len(c.events)} injections, "
          f"ruin {d.ruin_time:8.4f} / exit {c.ruin_time:8.4f}")
