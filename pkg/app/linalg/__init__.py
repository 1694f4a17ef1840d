"""Complex Hermitian linear algebra kernel"""
