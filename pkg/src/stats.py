"""
Manage run statistics

Currently tracks:

- Replies per status and query completion times per operation kind
- Messages and serialized bytes per message kind (sent, delivered, dropped)
- The load balance time series

Also computes Student-t confidence intervals over repeated runs
"""

from collections import Counter

import numpy as np
from scipy import stats as st

from const import OK
from settings import CONFIDENCE, NS_PER_MS


class RunStats:
    """
    Keep track of one simulation run

    Attributes:
        replies (list): Every ```Reply``` in completion order
        sent (Counter): Messages sent per kind
        sent_bytes (Counter): Serialized bytes sent per kind
        delivered (int): Messages handed to a live node
        dropped (int): Messages lost to faults or crashed receivers
        metric_rows (list): [time_s, balance, load of every node] rows
    """

    def __init__(self):
        self.replies = []
        self.sent = Counter()
        self.sent_bytes = Counter()
        self.delivered = 0
        self.dropped = 0
        self.metric_rows = []

    def on_send(self, msg):
        self.sent[msg.kind] += 1
        self.sent_bytes[msg.kind] += msg.nbytes

    def on_reply(self, reply):
        self.replies.append(reply)

    def get_status_counts(self):
        """Return a dict status -> number of replies"""
        return dict(Counter(r.status for r in self.replies))

    def get_mean_qct(self, dhr=None):
        """
        Return a dict operation kind -> mean QCT in ms of its successful replies

        With ```dhr``` only replies of items with (True) or without (False) DHRs count
        """
        qcts = {}
        for r in self.replies:
            if r.status != OK or (dhr is not None and r.dhr != dhr):
                continue
            qcts.setdefault(r.kind, []).append(r.qct / NS_PER_MS)
        return {kind: float(np.mean(v)) for kind, v in sorted(qcts.items())}

    def get_traffic(self):
        """Return a dict message kind -> {'count', 'bytes'}"""
        return {kind: {'count': self.sent[kind], 'bytes': self.sent_bytes[kind]} for kind in sorted(self.sent)}

    def total_sent(self):
        return sum(self.sent.values())

    def ops_rows(self):
        """One CSV row per reply (see ```const.OPS_COLUMNS```)"""
        return [[r.op_id, r.kind, r.key, int(r.dhr), r.coordinator, r.status, r.error,
                 r.submitted_at / NS_PER_MS, r.completed_at / NS_PER_MS, r.qct / NS_PER_MS,
                 r.attempts, int(r.degraded), 1] for r in self.replies]


def mean_ci(values, confidence=CONFIDENCE):
    """
    Mean and Student-t confidence interval (n - 1 degrees of freedom)

    Returns (n, mean, low, high); a single value gives a zero width interval
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError('no values given')
    mean = float(values.mean())
    if n == 1:
        return n, mean, mean, mean
    sem = float(values.std(ddof=1) / np.sqrt(n))
    if sem == 0:
        return n, mean, mean, mean
    half = float(st.t.ppf((1 + confidence) / 2, n - 1)) * sem
    return n, mean, mean - half, mean + half


def aggregate(rows, experiment, point_key, metrics, confidence=CONFIDENCE):
    """
    Aggregate per-run rows (dicts) into rows of ```const.AGGREGATE_COLUMNS```

    Runs are grouped by (strategy, point); every metric gets its own row
    """
    groups = {}
    for row in rows:
        groups.setdefault((row.get('strategy', ''), row[point_key]), []).append(row)

    result = []
    for (strategy, point), runs in groups.items():
        for metric in metrics:
            n, mean, low, high = mean_ci([run[metric] for run in runs], confidence)
            result.append([experiment, strategy, point, metric, n, mean, low, high])
    return result
