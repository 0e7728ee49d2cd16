"""
Suite de tests de steklab
"""
