"""
Data handling requirements (DHRs) and capability matching

Includes:

- ```DhrType``` and the data-driven ```Registry``` of types
- ```DhrRequest``` (a client's per-item demand) and ```NodeCapabilities```
- ```property_satisfies```, ```node_is_eligible``` and the ```CapabilityStore```

Everything here is immutable or owned by a single node, so it can be used from any context
"""

import json
import logging
import operator
from dataclasses import dataclass, field
from types import MappingProxyType

import jsonschema

from const import KIND_EQUALITY, KIND_THRESHOLD
from errors import ParamError, RegistryError, UnknownDhrType, UnknownProperty

logger = logging.getLogger(__name__)


"""
Comparison functions per kind

New kinds register a predicate ```f(offered, demanded) -> bool``` with ```register_kind```
"""
COMPARATORS = {
    KIND_EQUALITY: operator.eq,
    KIND_THRESHOLD: operator.ge,
}


def register_kind(kind, predicate):
    """
    Make a new comparison kind available to registries

    Attributes:
        kind (str): Name used in the registry JSON
        predicate (callable): ```predicate(offered, demanded)``` returning a bool
    """
    if kind in COMPARATORS:
        raise RegistryError(f'comparison kind {kind!r} already registered')
    COMPARATORS[kind] = predicate


REGISTRY_SCHEMA = {
    'type': 'array',
    'items': {
        'type': 'object',
        'required': ['id', 'kind', 'domain'],
        'additionalProperties': False,
        'properties': {
            'id': {'type': 'string', 'minLength': 1},
            'kind': {'type': 'string'},
            'domain': {'type': 'array', 'minItems': 1,
                       'items': {'type': ['string', 'integer']}},
            'aliases': {'type': 'object',
                        'additionalProperties': {'type': ['string', 'integer']}},
            'unit': {'type': 'string'},
            'expires': {'type': 'boolean'},
        },
    },
}


@dataclass(frozen=True)
class DhrType:
    """
    One type of DHR: its admissible properties and how two of them compare

    Attributes:
        id (str): Short identifier, e.g. 'location'
        kind (str): Key of ```COMPARATORS``` ('equality' or 'threshold' built in)
        domain (tuple): Admissible literals (strictly increasing integers for thresholds)
        aliases (dict): Alternative spellings of domain members, e.g. {'AES-256': 256}
        unit (str): Unit of threshold levels, informational only
        expires (bool): Demanded levels are lifetimes in seconds and give items an expiry time
    """
    id: str
    kind: str
    domain: tuple
    aliases: MappingProxyType = field(default_factory=dict, hash=False)
    unit: str = ''
    expires: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'domain', tuple(self.domain))
        object.__setattr__(self, 'aliases', MappingProxyType(dict(self.aliases)))

        if self.kind not in COMPARATORS:
            raise RegistryError(f'type {self.id!r}: unknown comparison kind {self.kind!r}')
        if not self.domain:
            raise RegistryError(f'type {self.id!r}: empty property domain')
        if len(set(self.domain)) != len(self.domain):
            raise RegistryError(f'type {self.id!r}: duplicate properties in domain')

        if self.kind == KIND_THRESHOLD:
            if not all(isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in self.domain):
                raise RegistryError(f'type {self.id!r}: threshold levels must be non-negative integers')
            if any(a >= b for a, b in zip(self.domain, self.domain[1:])):
                raise RegistryError(f'type {self.id!r}: threshold levels must be strictly increasing')
        elif self.kind == KIND_EQUALITY:
            if not all(isinstance(p, str) for p in self.domain):
                raise RegistryError(f'type {self.id!r}: equality properties must be strings')

        for alias, target in self.aliases.items():
            if target not in self.domain:
                raise RegistryError(f'type {self.id!r}: alias {alias!r} maps outside the domain')

    @property
    def ordered(self):
        """True for kinds whose properties have a meaningful maximum"""
        return self.kind == KIND_THRESHOLD

    def __contains__(self, literal):
        return literal in self.domain

    def index(self, literal):
        """Position of a literal in the domain (canonical ordering)"""
        return self.domain.index(literal)

    def resolve(self, literal, position=None):
        """
        Map a literal as a client wrote it onto a domain member

        Aliases are tried first, then the literal itself. For thresholds a decimal string is accepted as a number.

        Raises ```UnknownProperty``` when nothing matches
        """
        if isinstance(literal, str) and literal in self.aliases:
            return self.aliases[literal]
        if literal in self.domain:
            return literal
        if self.ordered and isinstance(literal, str) and literal.isdigit() and int(literal) in self.domain:
            return int(literal)
        raise UnknownProperty(self.id, literal, position)

    def satisfies(self, offered, demanded):
        return COMPARATORS[self.kind](offered, demanded)

    def to_json(self):
        doc = {'id': self.id, 'kind': self.kind, 'domain': list(self.domain)}
        if self.aliases:
            doc['aliases'] = dict(self.aliases)
        if self.unit:
            doc['unit'] = self.unit
        if self.expires:
            doc['expires'] = True
        return doc


class Registry:
    """
    The DHR types known to a cluster

    Attributes:
        types (dict): type id -> ```DhrType```
    """

    def __init__(self, types=()):
        self.types = {}
        for t in types:
            if t.id in self.types:
                raise RegistryError(f'duplicate DHR type {t.id!r}')
            self.types[t.id] = t

    def __contains__(self, type_id):
        return type_id in self.types

    def __iter__(self):
        return iter(self.types.values())

    def __len__(self):
        return len(self.types)

    def type(self, type_id, position=None):
        """Look up a type, raising ```UnknownDhrType``` if it is not registered"""
        try:
            return self.types[type_id]
        except KeyError:
            raise UnknownDhrType(type_id, position) from None

    def ids(self):
        return list(self.types)

    @classmethod
    def from_json(cls, doc):
        """
        Build a registry from its JSON document

        Accepts either the bare list of types or an object with a 'types' list
        """
        if isinstance(doc, dict) and 'types' in doc:
            doc = doc['types']
        try:
            jsonschema.validate(instance=doc, schema=REGISTRY_SCHEMA)
        except jsonschema.ValidationError as e:
            path = '/'.join(str(p) for p in e.absolute_path) or '<root>'
            raise RegistryError(f'registry invalid at {path}: {e.message}') from None

        return cls(DhrType(id=t['id'], kind=t['kind'], domain=t['domain'],
                           aliases=t.get('aliases', {}), unit=t.get('unit', ''),
                           expires=t.get('expires', False)) for t in doc)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise RegistryError(f'{path}: {e}') from None
        registry = cls.from_json(doc)
        logger.debug('loaded %d DHR types from %s', len(registry), path)
        return registry

    def to_json(self):
        return [t.to_json() for t in self.types.values()]


def _frozen_demands(demands):
    return MappingProxyType({t: frozenset(v) for t, v in dict(demands).items()})


@dataclass(frozen=True)
class DhrRequest:
    """
    A client's demand for one item

    Attributes:
        demands (dict): type id -> non-empty frozenset of requested literals (empty mapping = no DHRs)
    """
    demands: MappingProxyType = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'demands', _frozen_demands(self.demands))
        for type_id, wanted in self.demands.items():
            if not wanted:
                raise ParamError(f'empty demand for DHR type {type_id!r}')

    def __hash__(self):
        return hash(frozenset(self.demands.items()))

    def __eq__(self, other):
        if not isinstance(other, DhrRequest):
            return NotImplemented
        return dict(self.demands) == dict(other.demands)

    def __bool__(self):
        return bool(self.demands)

    def is_empty(self):
        return not self.demands

    def validate(self, registry):
        """
        Check every demand against the registry

        Returns a request whose literals are canonical domain members (aliases resolved)
        """
        resolved = {}
        for type_id, wanted in self.demands.items():
            t = registry.type(type_id)
            resolved[type_id] = frozenset(t.resolve(lit) for lit in wanted)
        return DhrRequest(resolved)

    def sorted_literals(self, type_id, registry=None):
        """Demanded literals of one type, in domain order when a registry is given"""
        wanted = self.demands[type_id]
        if registry is not None and type_id in registry:
            t = registry.type(type_id)
            return sorted(wanted, key=lambda lit: t.index(lit) if lit in t else len(t.domain))
        return sorted(wanted, key=lambda lit: (isinstance(lit, str), lit))

    def lifetime(self, registry):
        """Smallest demanded lifetime (seconds) over expiring types, None if no such demand"""
        lifetimes = [min(wanted) for type_id, wanted in self.demands.items()
                     if type_id in registry and registry.type(type_id).expires]
        return min(lifetimes) if lifetimes else None

    def to_json(self):
        return {type_id: self.sorted_literals(type_id) for type_id in sorted(self.demands)}

    @classmethod
    def from_json(cls, doc):
        return cls({type_id: frozenset(wanted) for type_id, wanted in (doc or {}).items()})


@dataclass(frozen=True)
class NodeCapabilities:
    """
    What a node supports

    Attributes:
        node_id: Opaque, sortable node identifier
        supported (dict): type id -> frozenset of supported literals (a single maximum level for thresholds)
    """
    node_id: object
    supported: MappingProxyType = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'supported', _frozen_demands(self.supported))

    def __hash__(self):
        return hash((self.node_id, frozenset(self.supported.items())))

    def __eq__(self, other):
        if not isinstance(other, NodeCapabilities):
            return NotImplemented
        return self.node_id == other.node_id and dict(self.supported) == dict(other.supported)

    @classmethod
    def build(cls, node_id, supported, registry):
        """
        Validate and normalize capabilities against a registry

        Aliases are resolved, and threshold types keep only their maximum level
        """
        normalized = {}
        for type_id, offered in supported.items():
            t = registry.type(type_id)
            if isinstance(offered, (str, int)):
                offered = [offered]
            levels = {t.resolve(lit) for lit in offered}
            if not levels:
                continue
            normalized[type_id] = frozenset([max(levels)]) if t.ordered else frozenset(levels)
        return cls(node_id, normalized)

    def to_json(self):
        return {'node': self.node_id,
                'supported': {t: sorted(v, key=lambda lit: (isinstance(lit, str), lit))
                              for t, v in sorted(self.supported.items())}}

    @classmethod
    def from_json(cls, doc):
        return cls(doc['node'], {t: frozenset(v) for t, v in doc['supported'].items()})


def property_satisfies(dhr_type, offered, demanded):
    """
    Compare two properties of the same type

    Equality types match iff offered == demanded, threshold types iff offered >= demanded

    Raises ```UnknownProperty``` if a literal is outside the type's domain
    """
    for literal in (offered, demanded):
        if literal not in dhr_type:
            raise UnknownProperty(dhr_type.id, literal)
    return dhr_type.satisfies(offered, demanded)


def node_is_eligible(caps, req, registry):
    """
    True iff the node offers, for every demanded type, a property satisfying one of the demanded ones

    An empty request is satisfied by every node
    """
    for type_id, wanted in req.demands.items():
        t = registry.type(type_id)
        offered = caps.supported.get(type_id, ())
        if not any(property_satisfies(t, o, d) for o in offered for d in wanted):
            return False
    return True


class CapabilityStore:
    """
    Replicated map of node -> capabilities

    Announcements carry a sequence number; the highest one per node wins

    Attributes:
        registry (Registry): Types used for matching
        entries (dict): node_id -> (announcement seq, ```NodeCapabilities```)
    """

    def __init__(self, registry):
        self.registry = registry
        self.entries = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node_id):
        return node_id in self.entries

    def announce(self, caps, seq):
        """Apply an announcement, returns False if an equal or newer one is already known"""
        current = self.entries.get(caps.node_id)
        if current is not None and current[0] >= seq:
            return False
        self.entries[caps.node_id] = (seq, caps)
        return True

    def get(self, node_id):
        entry = self.entries.get(node_id)
        return entry[1] if entry else None

    def nodes(self):
        return sorted(self.entries)

    def eligible_nodes(self, req, among=None):
        """
        All nodes complying with ```req```, ordered by node id

        Attributes:
            req (DhrRequest): A validated request
            among (iterable): Restrict the search to these nodes (e.g. live ones)
        """
        candidates = self.nodes() if among is None else sorted(n for n in among if n in self.entries)
        return [n for n in candidates if node_is_eligible(self.entries[n][1], req, self.registry)]

    def copy(self):
        other = CapabilityStore(self.registry)
        other.entries = dict(self.entries)
        return other

    def to_json(self):
        return [{'seq': seq, **caps.to_json()} for seq, caps in
                (self.entries[n] for n in self.nodes())]

    @classmethod
    def from_json(cls, doc, registry):
        store = cls(registry)
        for entry in doc:
            store.announce(NodeCapabilities.from_json(entry), entry['seq'])
        return store

    def serialize(self):
        """Canonical bytes, equal for converged replicas"""
        return json.dumps(self.to_json(), sort_keys=True, separators=(',', ':')).encode('utf-8')
