"""
Store specific constants

Includes:

- operation, reply, repair and violation kinds
- comparison kinds of DHR types
- network presets (uniform, azure10)
- the regional node / demand distributions of the DHR-fit experiment
- CSV column sets of every file the CLI writes

Do not change these constants directly as other parts of the store (and every CSV consumer) rely on their exact format
"""

from settings import *

############## Custom types ##############

# operations a client can ask a coordinator for
OP_CREATE = 'create'
OP_READ = 'read'
OP_UPDATE = 'update'
OP_DELETE = 'delete'
OPS = (OP_CREATE, OP_READ, OP_UPDATE, OP_DELETE)

# replies that reach a client
OK = 'ok'
NOT_FOUND = 'not_found'
ERROR = 'error'

# comparison kinds of a DHR type
KIND_EQUALITY = 'equality'  # offered == demanded
KIND_THRESHOLD = 'threshold'  # offered >= demanded

# repair actions of the recovery module
REISSUE_CREATE = 'ReissueCreate'
ROLLBACK_CREATE = 'RollbackCreate'
CLIENT_BROADCAST_CLEANUP = 'ClientBroadcastCleanup'
REISSUE_READ = 'ReissueRead'
REISSUE_UPDATE = 'ReissueUpdate'
BROADCAST_DELETE = 'BroadcastDelete'
EXPIRY_DELETE = 'ExpiryDelete'

# global scan findings
DANGLING = 'dangling'
UNREFERENCED = 'unreferenced'

# timers a node can set
TIMER_GOSSIP = 'gossip'
TIMER_LOAD_REFRESH = 'load_refresh'
TIMER_EXPIRY = 'expiry_sweep'
TIMER_DEADLINE = 'deadline'
TIMER_CLIENT = 'client_deadline'  # owned by the client, not by a node
TIMER_METRIC = 'metric'  # owned by the simulator

# fault actions
FAULT_CRASH = 'crash'
FAULT_DROP = 'drop'
FAULT_DELAY = 'delay'

"""
Network presets
    - RTTs in milliseconds, one-way delay is RTT / 2
    - azure10 only pins the two extremes that were measured (eu-north -> eu-west
      and asia-east -> eu-west), the remaining pairs are plausible fillers between them
"""
AZURE10_REGIONS = ['eu-north', 'eu-west', 'us-east', 'us-central', 'us-west',
                   'brazil-south', 'asia-east', 'asia-southeast', 'japan-east', 'australia-east']

AZURE10_RTT = [
    #  eu-n   eu-w   us-e   us-c   us-w   br-s   as-e   as-se  jp-e   au-e
    [0.0, 24.3, 88.4, 112.6, 152.9, 196.3, 262.5, 171.8, 248.1, 281.7],
    [24.3, 0.0, 79.6, 104.2, 141.5, 187.9, 286.2, 162.4, 238.3, 274.0],
    [88.4, 79.6, 0.0, 27.9, 68.3, 118.5, 205.7, 221.6, 158.2, 201.4],
    [112.6, 104.2, 27.9, 0.0, 41.8, 141.2, 182.3, 198.9, 136.4, 178.0],
    [152.9, 141.5, 68.3, 41.8, 0.0, 176.4, 146.8, 167.5, 108.9, 149.6],
    [196.3, 187.9, 118.5, 141.2, 176.4, 0.0, 276.9, 280.3, 255.1, 270.8],
    [262.5, 286.2, 205.7, 182.3, 146.8, 276.9, 0.0, 36.2, 51.7, 131.5],
    [171.8, 162.4, 221.6, 198.9, 167.5, 280.3, 36.2, 0.0, 70.4, 94.6],
    [248.1, 238.3, 158.2, 136.4, 108.9, 255.1, 51.7, 70.4, 0.0, 115.2],
    [281.7, 274.0, 201.4, 178.0, 149.6, 270.8, 131.5, 94.6, 115.2, 0.0],
]

PRESETS = ('uniform', 'azure10')

"""
DHR-fit experiment
    - nodes are spread like the public IP ranges of a large cloud provider
    - at shift 1.0 the demand of the biggest region is fully redistributed
"""
FIT_REGIONS = ['NA', 'EU', 'AP', 'SA', 'CN']
FIT_NODE_SHARE = [64.0, 17.0, 16.0, 2.0, 1.0]  # percent, also the demand at shift 0
FIT_SHIFTED_SHARE = [0.0, 47.61, 44.73, 5.74, 1.91]  # percent, demand at shift 1
FIT_NODES = 100

"""
Throughput experiment
    - two DHR types with two properties each, every property on half of the nodes
    - each combination of properties is supported by two or three of the ten nodes
"""
GRID_TYPES = {'a': ['a1', 'a2'], 'b': ['b1', 'b2']}
GRID_NODES = [  # (a, b) supported by node i
    ('a1', 'b1'), ('a1', 'b1'), ('a1', 'b1'), ('a1', 'b2'), ('a1', 'b2'),
    ('a2', 'b1'), ('a2', 'b1'), ('a2', 'b2'), ('a2', 'b2'), ('a2', 'b2'),
]
# every demand a client may attach: one property of one type, or one of each
GRID_OPTIONS = [
    {'a': ['a1']}, {'a': ['a2']}, {'b': ['b1']}, {'b': ['b2']},
    {'a': ['a1'], 'b': ['b1']}, {'a': ['a1'], 'b': ['b2']},
    {'a': ['a2'], 'b': ['b1']}, {'a': ['a2'], 'b': ['b2']},
]

############## CSV schemas ##############
OPS_COLUMNS = ['op_id', 'kind', 'key', 'dhr', 'coordinator', 'status', 'error',
               'submitted_ms', 'completed_ms', 'qct_ms', 'attempts', 'degraded', 'idealized']
METRIC_COLUMNS = ['time_s', 'balance']  # followed by one load column per node
FIG6_RUN_COLUMNS = ['experiment', 'strategy', 'rate', 'seed', 'inserts', 'balance']
FIG7_RUN_COLUMNS = ['experiment', 'strategy', 'shift', 'seed', 'inserts', 'balance', 'optimum', 'gap']
HOPCOUNT_RUN_COLUMNS = ['experiment', 'strategy', 'seed', 'op', 'dhr', 'n', 'mean_qct_ms', 'hops']
FAULTS_RUN_COLUMNS = ['experiment', 'seed', 'op', 'role', 'step', 'replication', 'status', 'violations']
AGGREGATE_COLUMNS = ['experiment', 'strategy', 'point', 'metric', 'n', 'mean', 'ci_low', 'ci_high']
VIOLATION_COLUMNS = ['kind', 'key', 'node', 'target']

######################################
