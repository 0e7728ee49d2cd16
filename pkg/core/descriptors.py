"""
Descripteurs de validation pour les réglages numériques
"""
import math

from core.errors import DomainError


class BoundedFloat:
    """Descripteur pour un réel borné

    Les bornes sont exclusives par défaut ; ``low_inclusive`` et
    ``high_inclusive`` permettent d'inclure les extrémités.
    """

    def __init__(self, low=-math.inf, high=math.inf, default=None,
                 low_inclusive=False, high_inclusive=False):
        self.low = low
        self.high = high
        self.default = default
        self.low_inclusive = low_inclusive
        self.high_inclusive = high_inclusive

    def __set_name__(self, owner, name):
        self.name = name

    def __get__(self, instance, owner):
        if instance is None:
            return self
        return instance.__dict__.get(self.name, self.default)

    def __set__(self, instance, value):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise DomainError(f"{self.name} doit être un réel : {value!r}")
        if math.isnan(value) or not self._in_range(value):
            left = '[' if self.low_inclusive else '('
            right = ']' if self.high_inclusive else ')'
            raise DomainError(
                f"{self.name} hors intervalle : {value} ∉ {left}{self.low}, {self.high}{right}"
            )
        instance.__dict__[self.name] = value

    def __delete__(self, instance):
        instance.__dict__.pop(self.name, None)

    def _in_range(self, value):
        above = value >= self.low if self.low_inclusive else value > self.low
        below = value <= self.high if self.high_inclusive else value < self.high
        return above and below


class PositiveInt:
    """Descripteur pour un entier supérieur ou égal à un minimum"""

    def __init__(self, minimum=1, default=None):
        self.minimum = minimum
        self.default = default

    def __set_name__(self, owner, name):
        self.name = name

    def __get__(self, instance, owner):
        if instance is None:
            return self
        return instance.__dict__.get(self.name, self.default)

    def __set__(self, instance, value):
        try:
            is_integer = not isinstance(value, bool) and int(value) == value
        except (TypeError, ValueError):
            is_integer = False
        if not is_integer:
            raise DomainError(f"{self.name} doit être un entier : {value!r}")
        if value < self.minimum:
            raise DomainError(f"{self.name} doit être ≥ {self.minimum} : {value}")
        instance.__dict__[self.name] = int(value)

    def __delete__(self, instance):
        instance.__dict__.pop(self.name, None)


class Choice:
    """Descripteur pour une valeur parmi un ensemble fixé"""

    def __init__(self, *choices, default=None):
        self.choices = tuple(choices)
        self.default = default

    def __set_name__(self, owner, name):
        self.name = name

    def __get__(self, instance, owner):
        if instance is None:
            return self
        return instance.__dict__.get(self.name, self.default)

    def __set__(self, instance, value):
        if value not in self.choices:
            raise DomainError(f"{self.name} invalide : {value!r}. Valeurs acceptées : {list(self.choices)}")
        instance.__dict__[self.name] = value

    def __delete__(self, instance):
        instance.__dict__.pop(self.name, None)
