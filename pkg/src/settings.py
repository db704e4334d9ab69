"""
Global simulator settings

Defines config paths and all default values used by the store and the experiments

Can be freely changed (a cluster config file or a command line flag overrides them)
"""

import os
import sys

"""
Settings and paths
"""

# Required for pyinstaller
if getattr(sys, 'frozen', False):  # PyInstaller adds this attribute
    # Running in a bundle
    CurrentPath = sys._MEIPASS
else:
    # Running in normal Python environment
    CurrentPath = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


############## Cluster ##############
REPLICATION = 1  # Replicas per item (1 <= r <= number of nodes)
VNODES = 1  # Tokens per node, evenly spaced over the ring
DEFAULT_STRATEGY = 'balanced'  # Target placement strategy (see strategies/)

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

############## Gossip ##############
SYNC_INTERVAL_MS = 1_000  # Gossip with one random peer this often
LOAD_REFRESH_MS = 60_000  # Refresh the own load report this often
METRIC_INTERVAL_MS = 1_000  # Emit a load balance row this often

############## Recovery ##############
ACK_TIMEOUT_MS = 2_000  # First deadline of an operation
RETRIES = 3  # Reissues before giving up
DEADLINE_GROWTH = 2  # Deadline multiplier per reissue
EXPIRY_SWEEP_MS = 1_000  # Target stores are swept for expired items this often
CLIENT_SLACK_MS = 1_000  # Extra patience of a client beyond the coordinator's last deadline

############## Items ##############
KEY_BYTES = 20
PAYLOAD_BYTES = 200
NUM_COLUMNS = 10

############## Network ##############
DEFAULT_RTT_MS = 100.0  # Uniform preset
JITTER_MS = 0.0  # Uniform extra one-way delay in [0, JITTER_MS)

############## Experiments ##############
SEED = 42  # Master seed when neither --seed nor PRADA_SEED is given
SEED_ENV = 'PRADA_SEED'
REPEATS = 10
CONFIDENCE = 0.99
FIG6_INSERTS = 10**6  # Desk scale (full scale is 10**7)
FIG6_RATES = [10**2, 10**3, 10**4, 10**5]
FIG7_INSERTS = 10**6
FIG7_RATE = 2 * 10**4
FIG7_SHIFTS = [s / 10 for s in range(11)]
FULL_SCALE_INSERTS = 10**7
HOPCOUNT_OPS = 50  # Operations per kind in the hop count experiment

############## Logging ##############
LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
######################################


############## Bundled configs ##############
CONFIG_DIR = os.path.join(CurrentPath, 'configs')  # Path to bundled configs
DEFAULT_REGISTRY = os.path.join(CONFIG_DIR, 'registry.json')
DEFAULT_CLUSTER = os.path.join(CONFIG_DIR, 'cluster10.json')
######################################
