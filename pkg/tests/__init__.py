"""Tests for ftrsec."""
