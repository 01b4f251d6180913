"""Extension core and task verification"""
