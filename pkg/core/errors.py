"""
Hiérarchie d'exceptions de steklab

Toutes les erreurs levées par la bibliothèque dérivent de SteklabError, ce
qui permet à la CLI de les convertir en messages lisibles. Les erreurs de
validation d'arguments dérivent aussi de ValueError.
"""


class SteklabError(Exception):
    """Erreur de base de la bibliothèque"""


class DomainError(SteklabError, ValueError):
    """Argument hors de son domaine de validité"""


class CapacityError(SteklabError):
    """Dépassement d'une capacité configurée (k, sommets, spectre calculé)"""


class GeometryError(SteklabError, ValueError):
    """Configuration géométrique invalide (disques non disjoints, rayon trop grand)"""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class MeshingError(SteklabError):
    """Échec de construction du maillage"""

    def __init__(self, message, hole=None):
        super().__init__(message)
        self.hole = hole


class AssemblyError(SteklabError):
    """Élément dégénéré rencontré pendant l'assemblage"""


class UsageError(SteklabError):
    """Opération appliquée à un objet inadapté"""


class NumericError(SteklabError):
    """Non-convergence d'un solveur ou d'une itération"""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfiniteSeminormError(NumericError):
    """Semi-norme duale infinie (masse totale non nulle)"""


class DegeneracyError(SteklabError, ValueError):
    """Mesure concentrée en un seul point"""


class ResultIOError(SteklabError):
    """Erreur d'écriture ou de lecture d'un fichier de résultats"""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
