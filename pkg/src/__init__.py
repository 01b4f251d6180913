"""
extlab - correct and normal extensions of differential operators
"""
