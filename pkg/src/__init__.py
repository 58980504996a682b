"""Secrecy metrics of FTR fading wiretap links."""
