"""Closed-form secrecy metrics and their quadrature oracles."""
