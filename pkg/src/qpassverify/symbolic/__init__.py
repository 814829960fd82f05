"""Symbolic circuit terms, rewrite rules, the prover and SMT-LIB export."""
