"""Monte-Carlo experiment harness"""
