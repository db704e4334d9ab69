"""
Exceptions raised by the store

Everything derives from ```DhrkvError``` so callers can catch the whole family.
Protocol failures inside a simulation are *not* raised, they come back as
typed replies (see ```coordinator.Reply```).
"""


class DhrkvError(Exception):
    """Base class of every error raised by the store"""


class RegistryError(DhrkvError):
    """A DHR type registry document is malformed"""


class UnknownDhrType(DhrkvError):
    """
    A requirement names a type that is not in the registry

    Attributes:
        type_id (str): The offending type identifier
        position (int): Byte offset into the statement text (None outside the parser)
    """

    def __init__(self, type_id, position=None):
        self.type_id = type_id
        self.position = position
        where = f' at byte {position}' if position is not None else ''
        super().__init__(f'unknown DHR type {type_id!r}{where}')


class UnknownProperty(DhrkvError):
    """
    A literal is outside the property domain of its type

    Attributes:
        type_id (str): Type the literal was checked against
        literal: The offending literal
        position (int): Byte offset into the statement text (None outside the parser)
    """

    def __init__(self, type_id, literal, position=None):
        self.type_id = type_id
        self.literal = literal
        self.position = position
        where = f' at byte {position}' if position is not None else ''
        super().__init__(f'unknown property {literal!r} for DHR type {type_id!r}{where}')


class ParseError(DhrkvError):
    """
    Statement text does not follow the grammar

    Attributes:
        position (int): Byte offset of the offending token (never beyond the input length)
        expected (str): What the parser was looking for
        found (str): What it found instead
    """

    def __init__(self, position, expected, found=''):
        self.position = position
        self.expected = expected
        self.found = found
        got = f', found {found!r}' if found else ''
        super().__init__(f'syntax error at byte {position}: expected {expected}{got}')


class InvalidReplicationFactor(DhrkvError):
    """Replication factor outside 1..cluster size"""


class UnsatisfiableDhr(DhrkvError):
    """No node of the cluster can comply with a request"""


class ConfigError(DhrkvError):
    """Malformed cluster / experiment configuration"""


class ParamError(DhrkvError):
    """Bad workload or experiment parameter"""


class RetriesExhausted(DhrkvError):
    """An operation kept timing out after the configured number of attempts"""


class OperationTimeout(DhrkvError):
    """No reply arrived before the deadline"""
