import os

# single-threaded BLAS is faster for this package's small matrices and keeps
# timing-sensitive acceptance tests stable; must be set before numpy loads
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
