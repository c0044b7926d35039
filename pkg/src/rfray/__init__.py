"""Ray-traced indoor radio propagation on triangle-mesh scenes."""
import os

# prefer OpenMP: some TBB builds are older than numba accepts and warn on every launch
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp tbb workqueue")

__version__ = "0.1.0"
