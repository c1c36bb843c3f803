"""Counter-based random streams keyed by (seed, replication, purpose).

Every stream is an independent Philox generator whose key is derived from
the triple, so a replication's draws never depend on which other
replications ran or in what order.
"""

import numpy as np

SERVICE = 0
INTERARRIVAL = 1
TIEBREAK = 2
SERVICE_ALT = 3
AUXILIARY = 4


def substream(seed, replication=0, purpose=SERVICE):
    seq = np.random.SeedSequence([int(seed), int(replication), int(purpose)])
    return np.random.Generator(np.random.Philox(seq))
