"""Tests for extlab"""
