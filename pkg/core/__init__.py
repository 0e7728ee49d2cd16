"""
Noyau de calcul de steklab : surfaces modèles, empilements, maillages,
éléments finis, spectres, stabilité et balayages
"""
