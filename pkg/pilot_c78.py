import time

import numpy as np

from isinglab.bench import PredictConfig, eval_mean_kl, eval_regression, train_gnn_on_spec
from isinglab.datasets import generate_dataset

t0 = time.time()
params9, hist, _ = train_gnn_on_spec(9, (2, 3), 1000, seed=700)
print("C7 train order 9:", round(time.time() - t0, 1), "s; final loss", hist[-1], flush=True)

for order, count in ((9, 200), (16, 200), (36, 100)):
    t0 = time.time()
    labeler = "auto" if order <= 16 else "ve"
    test = generate_dataset(order, 2, 3, count, seed=7000 + order, labeler=labeler)
    gen_t = time.time() - t0
    t0 = time.time()
    reg_gnn = eval_regression("gnn", test, params=params9)
    reg_bp = eval_regression("bp", test)
    kl_gnn = eval_mean_kl("gnn", test, params=params9)
    kl_bp = eval_mean_kl("bp", test)
    print(
        f"C7 order {order}: gen {gen_t:.1f}s eval {time.time()-t0:.1f}s "
        f"GNN R2={reg_gnn.r2:.4f} BP R2={reg_bp.r2:.4f} "
        f"GNN KL={kl_gnn:.4f} BP KL={kl_bp:.4f}",
        flush=True,
    )

print("=== C8 degree matching ===", flush=True)
t0 = time.time()
params_lo, _, _ = train_gnn_on_spec(10, (2, 3), 1000, seed=800)
params_hi, _, _ = train_gnn_on_spec(10, (5, 6), 1000, seed=801)
print("trained both:", round(time.time() - t0, 1), "s", flush=True)
test_lo = generate_dataset(10, 2, 3, 200, seed=8100)
test_hi = generate_dataset(10, 5, 6, 200, seed=8101)
for name, test in (("lo[2,3]", test_lo), ("hi[5,6]", test_hi)):
    kl_lo = eval_mean_kl("gnn", test, params=params_lo)
    kl_hi = eval_mean_kl("gnn", test, params=params_hi)
    print(f"C8 test {name}: train[2,3] KL={kl_lo:.4f}  train[5,6] KL={kl_hi:.4f}", flush=True)

print("=== C6 in-distribution, new generator, seed sweep ===", flush=True)
for seed in (900, 901, 902, 903, 904):
    t0 = time.time()
    params, _, _ = train_gnn_on_spec(10, (2, 3), 1000, seed=seed)
    test = generate_dataset(10, 2, 3, 200, seed=seed * 13 + 7)
    kl = eval_mean_kl("gnn", test, params=params)
    print(f"C6 seed {seed}: mean KL={kl:.4f} ({round(time.time()-t0,1)}s)", flush=True)
