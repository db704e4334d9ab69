"""
Fault injection plans

A plan is a list of rules; each rule matches message deliveries and crashes a node, drops the message or
delays it. Rules fire ```times``` times (None: every match).

JSON form of a rule:

    {"kind": "TargetWrite", "op": "c2", "after_ms": 0, "action": "crash", "victim": "dst", "times": 1}
"""

import logging
from dataclasses import dataclass

import jsonschema

from const import FAULT_CRASH, FAULT_DELAY, FAULT_DROP
from errors import ConfigError
from recovery import op_matches
from settings import NS_PER_MS

logger = logging.getLogger(__name__)

FAULT_SCHEMA = {
    'type': 'array',
    'items': {
        'type': 'object',
        'required': ['action'],
        'additionalProperties': False,
        'properties': {
            'kind': {'type': 'string'},
            'src': {'type': ['string', 'integer']},
            'dst': {'type': ['string', 'integer']},
            'key': {'type': 'string'},
            'op': {'type': 'string'},
            'after_ms': {'type': 'number', 'minimum': 0},
            'action': {'enum': [FAULT_CRASH, FAULT_DROP, FAULT_DELAY]},
            'victim': {'type': ['string', 'integer']},
            'extra_ms': {'type': 'number', 'minimum': 0},
            'times': {'type': ['integer', 'null'], 'minimum': 1},
        },
    },
}


@dataclass
class FaultRule:
    """
    Attributes:
        action (str): 'crash', 'drop' or 'delay'
        kind (str): Message kind to match (class name), None matches all
        src, dst: Sender / receiver to match
        key (str): Key to match
        op (str): Operation to match (an attempt id, or a base id covering all its attempts)
        after_ms (float): Only match deliveries at or after this simulated time
        victim: Node crashed by a 'crash' rule: 'src', 'dst' or a node id
        extra_ms (float): Added delay of a 'delay' rule
        times (int): Remaining firings, None fires forever
    """
    action: str
    kind: str | None = None
    src: object = None
    dst: object = None
    key: str | None = None
    op: str | None = None
    after_ms: float = 0
    victim: object = 'dst'
    extra_ms: float = 0
    times: int | None = 1

    def matches(self, msg, now):
        if self.times is not None and self.times <= 0:
            return False
        if now < self.after_ms * NS_PER_MS:
            return False
        if self.kind is not None and msg.kind != self.kind:
            return False
        if self.src is not None and msg.src != self.src:
            return False
        if self.dst is not None and msg.dst != self.dst:
            return False
        if self.key is not None and getattr(msg, 'key', None) != self.key:
            return False
        if self.op is not None and not op_matches(msg.op, self.op):
            return False
        return True

    def victim_of(self, msg):
        if self.victim == 'src':
            return msg.src
        if self.victim == 'dst':
            return msg.dst
        return self.victim

    @property
    def extra_ns(self):
        return int(round(self.extra_ms * NS_PER_MS))


class FaultPlan:
    """
    Ordered rules, the first matching rule fires

    Attributes:
        rules (list): ```FaultRule``` list
        fired (list): (time, rule, message kind) of every firing
    """

    def __init__(self, rules=()):
        self.rules = list(rules)
        self.fired = []

    def __len__(self):
        return len(self.rules)

    def add(self, rule):
        self.rules.append(rule)

    def check(self, msg, now):
        """The rule firing on this delivery, or None"""
        for rule in self.rules:
            if rule.matches(msg, now):
                if rule.times is not None:
                    rule.times -= 1
                self.fired.append((now, rule, msg.kind))
                logger.info('%.1fms fault %s on %s %s -> %s (%s)', now / NS_PER_MS, rule.action, msg.kind,
                            msg.src, msg.dst, msg.op)
                return rule
        return None

    @classmethod
    def from_json(cls, doc):
        try:
            jsonschema.validate(instance=doc or [], schema=FAULT_SCHEMA)
        except jsonschema.ValidationError as e:
            path = '/'.join(str(p) for p in e.absolute_path) or '<root>'
            raise ConfigError(f'fault plan invalid at {path}: {e.message}') from None
        return cls(FaultRule(**rule) for rule in doc or [])

    def to_json(self):
        return [{k: v for k, v in vars(rule).items() if v is not None} for rule in self.rules]
