import time

import numpy as np

from isinglab.bench import eval_mean_kl, eval_regression, train_gnn_on_spec
from isinglab.bp import BpConfig, bp_marginals
from isinglab.datasets import generate_dataset
from isinglab.exact import brute_force_marginals
from isinglab.gibbs import GibbsConfig, gibbs_marginals
from isinglab.model import GraphSpec, generate_graph, sample_model

print("=== BP convergence fraction (n=10, aund[2,3], damping 0.5) ===", flush=True)
conv = 0
for i in range(200):
    g = generate_graph(GraphSpec(10, 2, 3), seed=[410, i])
    m = sample_model(g, seed=[411, i])
    conv += bp_marginals(m, BpConfig(damping=0.5)).converged
print(f"converged {conv}/200", flush=True)

print("=== C4 gibbs seed scan ===", flush=True)
for base in (4000, 4001, 4002, 4003):
    t0 = time.time()
    devs = []
    for i in range(20):
        g = generate_graph(GraphSpec(10, 2, 3), seed=[base, i, 0])
        m = sample_model(g, seed=[base, i, 1])
        truth = brute_force_marginals(m)
        est = gibbs_marginals(m, GibbsConfig(1000, 100000, seed=[base, i, 2]))
        devs.append(float(np.max(np.abs(est.table - truth.table))))
    print(f"base {base}: max dev {max(devs):.4f} ({round(time.time()-t0,1)}s)", flush=True)

print("=== C7 size generalization ===", flush=True)
t0 = time.time()
params9, hist, _ = train_gnn_on_spec(9, (2, 3), 1000, seed=700)
print("train order 9:", round(time.time() - t0, 1), "s", flush=True)
for order, count in ((9, 200), (16, 200), (36, 100)):
    labeler = "auto" if order <= 16 else "ve"
    t0 = time.time()
    test = generate_dataset(order, 2, 3, count, seed=7000 + order, labeler=labeler)
    gen_t = time.time() - t0
    reg_gnn = eval_regression("gnn", test, params=params9)
    reg_bp = eval_regression("bp", test)
    print(
        f"order {order} (gen {gen_t:.1f}s): GNN R2={reg_gnn.r2:.4f} BP R2={reg_bp.r2:.4f}",
        flush=True,
    )

print("=== C8 degree matching ===", flush=True)
params_lo, _, _ = train_gnn_on_spec(10, (2, 3), 1000, seed=800)
params_hi, _, _ = train_gnn_on_spec(10, (5, 6), 1000, seed=801)
test_lo = generate_dataset(10, 2, 3, 200, seed=8100)
test_hi = generate_dataset(10, 5, 6, 200, seed=8101)
for name, test in (("lo[2,3]", test_lo), ("hi[5,6]", test_hi)):
    kl_lo = eval_mean_kl("gnn", test, params=params_lo)
    kl_hi = eval_mean_kl("gnn", test, params=params_hi)
    print(f"test {name}: train[2,3] KL={kl_lo:.4f}  train[5,6] KL={kl_hi:.4f}", flush=True)

print("=== C6 in-distribution seeds ===", flush=True)
for seed in (900, 901, 902, 903, 904):
    t0 = time.time()
    params, _, _ = train_gnn_on_spec(10, (2, 3), 1000, seed=seed)
    test = generate_dataset(10, 2, 3, 200, seed=seed * 13 + 7)
    kl = eval_mean_kl("gnn", test, params=params)
    print(f"seed {seed}: mean KL={kl:.4f} ({round(time.time()-t0,1)}s)", flush=True)
