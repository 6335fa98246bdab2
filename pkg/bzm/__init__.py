name = 'bzm'
__version__ = '0.1.0'

import os
import torch
# use a GPU if available
device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
# spectral identities are checked to 1e-12, single precision is not enough
dtype = torch.float64
torch.set_default_dtype(dtype)

# cap intra-op parallelism
_threads = os.environ.get('BZM_THREADS')
if _threads:
    torch.set_num_threads(max(1, int(_threads)))
