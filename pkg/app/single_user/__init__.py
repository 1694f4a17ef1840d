"""Single-user mode-dropping under per-antenna power constraints"""
