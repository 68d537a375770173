"""Franson interference of SPDC biphotons."""
