"""Iterative mode-dropping for the MIMO multiple-access channel"""
