"""Grids, exponential sums, spec parsing, settings and reports"""
