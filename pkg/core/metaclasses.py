"""
Métaclasses pour l'enregistrement automatique et la configuration
"""


class Registry:
    """Registre global, organisé par espaces de noms"""
    _registry = {}

    @classmethod
    def register(cls, name, obj, namespace='default'):
        cls._registry.setdefault(namespace, {})[name] = obj

    @classmethod
    def get(cls, name, namespace='default'):
        return cls._registry.get(namespace, {}).get(name)

    @classmethod
    def all(cls, namespace='default'):
        return dict(cls._registry.get(namespace, {}))

    @classmethod
    def clear(cls, namespace=None):
        if namespace is None:
            cls._registry.clear()
        else:
            cls._registry.pop(namespace, None)


class RateModelMeta(type):
    """Métaclasse des modèles de taux de convergence

    Chaque sous-classe concrète est enregistrée dans l'espace de noms
    ``rate_models`` sous sa clé ``key`` (nom de classe en minuscules par
    défaut). Les classes doivent déclarer ``basis`` (liste de fonctions de k).
    """

    namespace = 'rate_models'

    def __new__(cls, name, bases, attrs):
        if 'description' not in attrs:
            attrs['description'] = f"Modèle de taux {name}"

        if 'key' not in attrs:
            attrs['key'] = name.lower()

        new_class = super().__new__(cls, name, bases, attrs)

        if name != 'BaseRateModel':
            if not getattr(new_class, 'basis', None):
                raise ValueError(f"Modèle de taux sans fonctions de base : {name}")
            Registry.register(attrs['key'], new_class, cls.namespace)

        return new_class

    @property
    def n_params(cls):
        return len(cls.basis)


class ConfigMeta(type):
    """Métaclasse pour la configuration dynamique (singleton par classe)"""

    _config_instances = {}

    def __new__(cls, name, bases, attrs):
        if 'set_config' not in attrs:
            def set_config(self, key, value):
                """Définit une valeur de configuration"""
                if not hasattr(self, '_config'):
                    self._config = {}
                self._config[key] = value

            attrs['set_config'] = set_config

        if 'validate_config' not in attrs:
            def validate_config(self):
                """Vérifie la présence des champs requis"""
                required_fields = getattr(self, 'required_config_fields', [])
                for field in required_fields:
                    if field not in self._config:
                        raise ValueError(f"Champ de configuration requis manquant : {field}")
                return True

            attrs['validate_config'] = validate_config

        if name != 'BaseConfig':
            cls._config_instances[name] = None

        return super().__new__(cls, name, bases, attrs)

    def __call__(cls, *args, **kwargs):
        """Singleton : une seule instance par classe de configuration"""
        if cls.__name__ != 'BaseConfig' and cls.__name__ in cls._config_instances:
            if cls._config_instances[cls.__name__] is None:
                instance = super().__call__(*args, **kwargs)
                cls._config_instances[cls.__name__] = instance
                return instance
            return cls._config_instances[cls.__name__]
        return super().__call__(*args, **kwargs)

    def reset_instance(cls):
        """Oublie l'instance courante (utile dans les tests)"""
        if cls.__name__ in cls._config_instances:
            cls._config_instances[cls.__name__] = None
